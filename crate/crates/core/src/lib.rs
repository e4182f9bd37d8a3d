// Licensed under the Apache-2.0 license

//! Deterministic simulator of PUF-token access control for multi-tenant
//! FPGA SoCs.
//!
//! - [`puf`]: ring-oscillator PUF model and quality metrics.
//! - [`fabric`]: stub IP cores, security wrappers, bus transactions.
//! - [`controller`]: token provisioning, per-transaction authorization,
//!   integrity-level guarding and the event log.
//! - [`scenarios`]: attack and legitimate-flow scenarios plus the
//!   protection-bit baseline used for comparison.

pub mod controller;
pub mod fabric;
pub mod puf;
pub mod scenarios;
pub mod seed;
