// Licensed under the Apache-2.0 license

//! Run configuration. The on-disk form is TOML; every key is optional and
//! an empty document yields the defaults.
//!
//! ```toml
//! seed = 1
//! output_path = "report.txt"
//! scenarios = ["all"]          # or any of the registered names
//! compare = true
//!
//! [puf]
//! oscillator_count = 512
//! response_width = 256
//! challenge_width = 16
//! nominal_frequency = 100000000.0
//! sigma_process = 0.01
//! sigma_noise = 0.0001
//!
//! [population]
//! device_count = 100
//! challenge_count = 1
//! trial_count = 100
//!
//! [windows]
//! uniqueness = [0.45, 0.55]
//! uniformity = [0.44, 0.56]
//! reliability_min = 0.99
//! hd_band = [0.40, 0.60]
//! hd_band_min_fraction = 0.95
//!
//! [topology]
//! cores = [{ id = 1, kind = "AES", integrity = "HIGH" }, ...]
//! apps = [1, 2, 3, 4, 5]
//! bindings = [[1, 1], [2, 2], [3, 3], [4, 4], [5, 1]]
//!
//! [[inverted_expectations]]   # test hook: flips one scripted expectation
//! scenario = "trojan_leak"
//! action = 1
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use trusttoken_core::fabric::Topology;
use trusttoken_core::puf::{PufChallenge, PufConfig};
use trusttoken_core::scenarios::{self, Scenario, SCENARIO_NAMES};
use trusttoken_core::seed::mix_seed;

use crate::CliError;

pub const ALL_SCENARIOS: &str = "all";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Population {
    pub device_count: usize,
    pub challenge_count: usize,
    pub trial_count: usize,
}

impl Default for Population {
    fn default() -> Self {
        Self {
            device_count: 100,
            challenge_count: 1,
            trial_count: 100,
        }
    }
}

/// Acceptance windows for `puf-eval`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Windows {
    pub uniqueness: [f64; 2],
    pub uniformity: [f64; 2],
    pub reliability_min: f64,
    pub hd_band: [f64; 2],
    pub hd_band_min_fraction: f64,
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            uniqueness: [0.45, 0.55],
            uniformity: [0.44, 0.56],
            reliability_min: 0.99,
            hd_band: [0.40, 0.60],
            hd_band_min_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertedExpectation {
    pub scenario: String,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_path: PathBuf,
    pub scenarios: Vec<String>,
    pub compare: bool,
    pub puf: PufConfig,
    pub population: Population,
    pub windows: Windows,
    pub topology: Topology,
    pub inverted_expectations: Vec<InvertedExpectation>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output_path: PathBuf::from("trusttoken-report.txt"),
            scenarios: vec![ALL_SCENARIOS.to_string()],
            compare: true,
            puf: PufConfig::default(),
            population: Population::default(),
            windows: Windows::default(),
            topology: Topology::default(),
            inverted_expectations: Vec::new(),
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

fn check_window(key: &str, w: [f64; 2]) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&w[0]) || !(0.0..=1.0).contains(&w[1]) || w[0] > w[1] {
        return Err(invalid(
            key,
            format!(
                "window [{}, {}] must satisfy 0 <= lo <= hi <= 1",
                w[0], w[1]
            ),
        ));
    }
    Ok(())
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim().to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.puf
            .validate()
            .map_err(|e| invalid("puf", e.to_string()))?;
        let p = &self.population;
        if p.device_count < 2 {
            return Err(invalid(
                "population.device_count",
                "need at least 2 devices",
            ));
        }
        if p.challenge_count == 0 {
            return Err(invalid(
                "population.challenge_count",
                "need at least 1 challenge",
            ));
        }
        if p.challenge_count as u64 > u64::from(self.puf.challenge_space()) {
            return Err(invalid(
                "population.challenge_count",
                format!(
                    "only {} distinct challenges exist",
                    self.puf.challenge_space()
                ),
            ));
        }
        if p.trial_count < 2 {
            return Err(invalid("population.trial_count", "need at least 2 trials"));
        }
        let w = &self.windows;
        check_window("windows.uniqueness", w.uniqueness)?;
        check_window("windows.uniformity", w.uniformity)?;
        check_window("windows.hd_band", w.hd_band)?;
        check_window("windows.reliability_min", [w.reliability_min, 1.0])?;
        check_window(
            "windows.hd_band_min_fraction",
            [w.hd_band_min_fraction, 1.0],
        )?;
        self.topology
            .build(0)
            .map_err(|e| invalid("topology", e.to_string()))?;
        if self.scenarios.is_empty() {
            return Err(invalid(
                "scenarios",
                "select at least one scenario or \"all\"",
            ));
        }
        for name in &self.scenarios {
            if name != ALL_SCENARIOS && !SCENARIO_NAMES.contains(&name.as_str()) {
                return Err(invalid("scenarios", format!("unknown scenario {name:?}")));
            }
        }
        if self.output_path.as_os_str().is_empty() {
            return Err(invalid("output_path", "must not be empty"));
        }
        self.selected_scenarios()?;
        Ok(())
    }

    /// Challenges used by `puf-eval`: distinct values drawn from the seed.
    pub fn challenges(&self) -> Vec<PufChallenge> {
        let space = u64::from(self.puf.challenge_space());
        let mut out: Vec<PufChallenge> = Vec::with_capacity(self.population.challenge_count);
        let mut i = 0u64;
        while out.len() < self.population.challenge_count {
            let v = (mix_seed(self.seed, i) % space) as u32;
            let c = PufChallenge::new(v, &self.puf).expect("reduced modulo the challenge space");
            if !out.contains(&c) {
                out.push(c);
            }
            i += 1;
        }
        out
    }

    /// Scenarios to run, in suite order, with inverted expectations applied.
    /// `legit_flow` runs on the configured topology.
    pub fn selected_scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        let all = self.scenarios.iter().any(|s| s == ALL_SCENARIOS);
        let mut selected = Vec::new();
        for name in SCENARIO_NAMES {
            if !(all || self.scenarios.iter().any(|s| s == name)) {
                continue;
            }
            let s = if name == scenarios::LEGIT_FLOW {
                scenarios::legit_flow_on(self.topology.clone())
            } else {
                scenarios::by_name(name).map_err(|e| invalid("scenarios", e.to_string()))?
            };
            selected.push(s);
        }
        for inv in &self.inverted_expectations {
            let s = selected
                .iter_mut()
                .find(|s| s.name == inv.scenario)
                .ok_or_else(|| {
                    invalid(
                        "inverted_expectations",
                        format!("scenario {:?} is not selected", inv.scenario),
                    )
                })?;
            s.invert_expectation(inv.action)
                .map_err(|e| invalid("inverted_expectations", e.to_string()))?;
        }
        Ok(selected)
    }
}
