// Licensed under the Apache-2.0 license

//! Central token controller: provisions PUF-derived tokens, mediates every
//! bus transaction, guards integrity-level changes and keeps the audit log.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::fabric::{
    ip_compute, BusTransaction, Decision, Fabric, Initiator, IntegrityLevel, IpCoreId, Reason,
    TransactionResult,
};
use crate::puf::{
    evaluate_noiseless, OscillatorArray, PufChallenge, PufConfig, PufError, PufResponse,
};
use crate::seed::{domain, mix_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("no route to {0}")]
    Routing(IpCoreId),
    #[error("cannot provision {needed} tokens from {available} distinct challenges")]
    Capacity { needed: usize, available: u32 },
    #[error(transparent)]
    Puf(#[from] PufError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ChannelState {
    Enabled,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenEntry {
    pub token: PufResponse,
    pub challenge: PufChallenge,
    pub allowed_sources: BTreeSet<Initiator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuthorizationDecision {
    pub decision: Decision,
    pub reason: Reason,
    pub cycles: u8,
}

impl AuthorizationDecision {
    fn new(decision: Decision, reason: Reason, level: IntegrityLevel) -> Self {
        Self {
            decision,
            reason,
            cycles: cycles_for(level),
        }
    }

    fn granted(level: IntegrityLevel) -> Self {
        Self::new(Decision::Granted, Reason::Ok, level)
    }

    fn denied(reason: Reason, level: IntegrityLevel) -> Self {
        Self::new(Decision::Denied, reason, level)
    }

    pub fn is_granted(&self) -> bool {
        self.decision == Decision::Granted
    }
}

/// Authorization latency: the wrapper/controller round trip plus a table
/// lookup for protected cores, a single cycle otherwise.
pub fn cycles_for(level: IntegrityLevel) -> u8 {
    match level {
        IntegrityLevel::High => 2,
        IntegrityLevel::Low => 1,
    }
}

/// The controller's authoritative state. `entries` change only through
/// provisioning; authorization touches `channels` alone.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenTable {
    entries: BTreeMap<IpCoreId, TokenEntry>,
    channels: BTreeMap<IpCoreId, ChannelState>,
    integrity: BTreeMap<IpCoreId, IntegrityLevel>,
    used_challenges: BTreeSet<PufChallenge>,
}

impl TokenTable {
    pub fn entry(&self, core: IpCoreId) -> Option<&TokenEntry> {
        self.entries.get(&core)
    }

    pub fn entries(&self) -> impl Iterator<Item = (IpCoreId, &TokenEntry)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    pub fn channel(&self, core: IpCoreId) -> Option<ChannelState> {
        self.channels.get(&core).copied()
    }

    pub fn integrity(&self, core: IpCoreId) -> Option<IntegrityLevel> {
        self.integrity.get(&core).copied()
    }

    /// Decides `txn` from the table alone; the presented `ar_integrity`
    /// signal plays no part. Checks run in the order channel, token, id,
    /// binding and the first failure names the reason. Token and binding
    /// failures latch the destination channel.
    pub fn authorize(
        &mut self,
        txn: &BusTransaction,
    ) -> Result<AuthorizationDecision, ControllerError> {
        let level = self
            .integrity(txn.dest)
            .ok_or(ControllerError::Routing(txn.dest))?;
        if self.channel(txn.dest) != Some(ChannelState::Enabled) {
            return Ok(AuthorizationDecision::denied(
                Reason::ChannelDisabled,
                level,
            ));
        }
        if level == IntegrityLevel::Low {
            return Ok(AuthorizationDecision::granted(level));
        }
        let verdict = match self.entries.get(&txn.dest) {
            Some(e) if txn.token_signal.as_ref() != Some(&e.token) => Some(Reason::TokenMismatch),
            None => Some(Reason::TokenMismatch),
            Some(_) if txn.id_signal != txn.dest => Some(Reason::IdMismatch),
            Some(e) if !e.allowed_sources.contains(&txn.source) => Some(Reason::BindingViolation),
            Some(_) => None,
        };
        Ok(match verdict {
            None => AuthorizationDecision::granted(level),
            Some(reason) => {
                if matches!(reason, Reason::TokenMismatch | Reason::BindingViolation) {
                    self.channels.insert(txn.dest, ChannelState::Disabled);
                }
                AuthorizationDecision::denied(reason, level)
            }
        })
    }

    fn token_in_use(&self, token: &PufResponse) -> bool {
        self.entries.values().any(|e| &e.token == token)
    }
}

/// Challenge used for `core` on the given provisioning attempt.
pub fn derive_challenge(
    core: IpCoreId,
    seed: u64,
    attempt: u32,
    config: &PufConfig,
) -> PufChallenge {
    let h = mix_seed(
        mix_seed(domain::CHALLENGE ^ seed, u64::from(core.0)),
        u64::from(attempt),
    );
    PufChallenge::new((h % u64::from(config.challenge_space())) as u32, config)
        .expect("value reduced modulo the challenge space")
}

fn allowed_sources(fabric: &Fabric, core: IpCoreId) -> BTreeSet<Initiator> {
    fabric
        .bindings()
        .filter(|&(_, c)| c == core)
        .map(|(a, _)| Initiator::App(a))
        .chain(std::iter::once(Initiator::Core(core)))
        .collect()
}

/// Draws a token for `core` whose challenge and response are unused in
/// `table`, retrying with successive attempts on collision.
fn fresh_token(
    table: &TokenTable,
    core: IpCoreId,
    puf: &OscillatorArray,
    config: &PufConfig,
    seed: u64,
) -> Result<(PufChallenge, PufResponse), ControllerError> {
    let space = config.challenge_space();
    for attempt in 0..space.saturating_mul(4) {
        let challenge = derive_challenge(core, seed, attempt, config);
        if table.used_challenges.contains(&challenge) {
            continue;
        }
        let token = evaluate_noiseless(puf, challenge, config)?;
        if !table.token_in_use(&token) {
            return Ok((challenge, token));
        }
    }
    Err(ControllerError::Capacity {
        needed: table.entries.len() + 1,
        available: space,
    })
}

fn install(
    table: &mut TokenTable,
    fabric: &mut Fabric,
    core: IpCoreId,
    challenge: PufChallenge,
    token: PufResponse,
) -> Result<(), ControllerError> {
    let allowed = allowed_sources(fabric, core);
    fabric
        .wrapper_mut(core)
        .ok_or(ControllerError::Routing(core))?
        .install_token(token.clone());
    table.used_challenges.insert(challenge);
    table.entries.insert(
        core,
        TokenEntry {
            token,
            challenge,
            allowed_sources: allowed,
        },
    );
    Ok(())
}

/// Trusted setup: every HIGH core gets a distinct token evaluated on the
/// central PUF, mirrored into its wrapper. All channels start enabled.
pub fn provision(
    fabric: &mut Fabric,
    puf: &OscillatorArray,
    config: &PufConfig,
    challenge_derivation_seed: u64,
) -> Result<TokenTable, ControllerError> {
    config.validate()?;
    let high: Vec<IpCoreId> = fabric
        .wrappers()
        .filter(|w| w.core().integrity_level() == IntegrityLevel::High)
        .map(|w| w.core().id())
        .collect();
    if high.len() as u64 > u64::from(config.challenge_space()) {
        return Err(ControllerError::Capacity {
            needed: high.len(),
            available: config.challenge_space(),
        });
    }
    let mut table = TokenTable::default();
    for w in fabric.wrappers() {
        table
            .integrity
            .insert(w.core().id(), w.core().integrity_level());
        table.channels.insert(w.core().id(), ChannelState::Enabled);
    }
    for core in high {
        let (challenge, token) = fresh_token(&table, core, puf, config, challenge_derivation_seed)?;
        install(&mut table, fabric, core, challenge, token)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogOutcome {
    Decided(AuthorizationDecision),
    Unroutable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLogEntry {
    pub sequence_no: u64,
    pub tick: u64,
    pub transaction: BusTransaction,
    pub outcome: LogOutcome,
}

impl EventLogEntry {
    pub fn decision(&self) -> Option<Decision> {
        match self.outcome {
            LogOutcome::Decided(d) => Some(d.decision),
            LogOutcome::Unroutable => None,
        }
    }

    pub fn reason(&self) -> Option<Reason> {
        match self.outcome {
            LogOutcome::Decided(d) => Some(d.reason),
            LogOutcome::Unroutable => None,
        }
    }
}

/// Header line of the exported event log.
pub const LOG_HEADER: &str = "   seq   tick source   dest     decision reason";

impl fmt::Display for EventLogEntry {
    /// `sequence tick source dest decision reason`, column aligned.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (decision, reason) = match self.outcome {
            LogOutcome::Decided(d) => (d.decision.to_string(), d.reason.as_str()),
            LogOutcome::Unroutable => ("ERROR".to_string(), "UNROUTABLE"),
        };
        write!(
            f,
            "{:>6} {:>6} {:<8} {:<8} {:<8} {}",
            self.sequence_no,
            self.tick,
            self.transaction.source.to_string(),
            self.transaction.dest.to_string(),
            decision,
            reason
        )
    }
}

/// Conjunctive filter over log entries; `None` fields match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LogFilter {
    pub decision: Option<Decision>,
    pub reason: Option<Reason>,
    pub dest: Option<IpCoreId>,
}

impl LogFilter {
    pub fn decision(decision: Decision) -> Self {
        Self {
            decision: Some(decision),
            ..Self::default()
        }
    }

    pub fn matches(&self, e: &EventLogEntry) -> bool {
        self.decision.is_none_or(|d| e.decision() == Some(d))
            && self.reason.is_none_or(|r| e.reason() == Some(r))
            && self.dest.is_none_or(|d| e.transaction.dest == d)
    }
}

/// A provisioned controller bound to its central PUF device.
#[derive(Debug, Clone)]
pub struct Controller {
    table: TokenTable,
    puf: OscillatorArray,
    puf_config: PufConfig,
    derivation_seed: u64,
    log: Vec<EventLogEntry>,
}

impl Controller {
    pub fn provision(
        fabric: &mut Fabric,
        puf: OscillatorArray,
        puf_config: PufConfig,
        derivation_seed: u64,
    ) -> Result<Self, ControllerError> {
        let table = provision(fabric, &puf, &puf_config, derivation_seed)?;
        Ok(Self {
            table,
            puf,
            puf_config,
            derivation_seed,
            log: Vec::new(),
        })
    }

    pub fn table(&self) -> &TokenTable {
        &self.table
    }

    pub fn puf_config(&self) -> &PufConfig {
        &self.puf_config
    }

    pub fn authorize(
        &mut self,
        txn: &BusTransaction,
    ) -> Result<AuthorizationDecision, ControllerError> {
        self.table.authorize(txn)
    }

    /// Mediates `txn`; a grant runs the destination stub. Exactly one log
    /// entry is appended per call, routing failures included.
    pub fn handle_transaction(
        &mut self,
        fabric: &mut Fabric,
        txn: BusTransaction,
        tick: u64,
    ) -> Result<TransactionResult, ControllerError> {
        let sequence_no = self.log.len() as u64;
        let decided = self.table.authorize(&txn).and_then(|d| {
            fabric
                .wrapper(txn.dest)
                .map(|_| d)
                .ok_or(ControllerError::Routing(txn.dest))
        });
        let decision = match decided {
            Ok(d) => d,
            Err(e) => {
                self.log.push(EventLogEntry {
                    sequence_no,
                    tick,
                    transaction: txn,
                    outcome: LogOutcome::Unroutable,
                });
                return Err(e);
            }
        };
        let data_out = decision.is_granted().then(|| {
            let core = fabric
                .wrapper_mut(txn.dest)
                .expect("checked above")
                .core_mut();
            ip_compute(core, txn.op, txn.address, txn.data)
        });
        self.log.push(EventLogEntry {
            sequence_no,
            tick,
            transaction: txn,
            outcome: LogOutcome::Decided(decision),
        });
        Ok(TransactionResult {
            decision: decision.decision,
            reason: decision.reason,
            data_out,
            cycles: decision.cycles,
        })
    }

    /// Changes `target`'s integrity level. The request must carry the token
    /// the controller holds for `target`; anything else is refused with
    /// `INTEGRITY_TAMPER` and leaves all state untouched. Raising a core to
    /// HIGH provisions a fresh token for it.
    pub fn set_integrity(
        &mut self,
        fabric: &mut Fabric,
        target: IpCoreId,
        new_level: IntegrityLevel,
        presented_token: Option<&PufResponse>,
    ) -> Result<AuthorizationDecision, ControllerError> {
        let current = self
            .table
            .integrity(target)
            .ok_or(ControllerError::Routing(target))?;
        if fabric.wrapper(target).is_none() {
            return Err(ControllerError::Routing(target));
        }
        let authorized = match (self.table.entry(target), presented_token) {
            (Some(e), Some(t)) => &e.token == t,
            _ => false,
        };
        if !authorized {
            return Ok(AuthorizationDecision::denied(
                Reason::IntegrityTamper,
                current,
            ));
        }
        self.apply_level(fabric, target, current, new_level)?;
        Ok(AuthorizationDecision::granted(current))
    }

    /// Controller-internal raise to HIGH, used by the trusted integrator for
    /// cores that were never provisioned.
    pub fn raise_integrity_internal(
        &mut self,
        fabric: &mut Fabric,
        target: IpCoreId,
    ) -> Result<AuthorizationDecision, ControllerError> {
        let current = self
            .table
            .integrity(target)
            .ok_or(ControllerError::Routing(target))?;
        if fabric.wrapper(target).is_none() {
            return Err(ControllerError::Routing(target));
        }
        self.apply_level(fabric, target, current, IntegrityLevel::High)?;
        Ok(AuthorizationDecision::granted(current))
    }

    fn apply_level(
        &mut self,
        fabric: &mut Fabric,
        target: IpCoreId,
        current: IntegrityLevel,
        new_level: IntegrityLevel,
    ) -> Result<(), ControllerError> {
        if current == new_level {
            return Ok(());
        }
        if new_level == IntegrityLevel::High {
            let (challenge, token) = fresh_token(
                &self.table,
                target,
                &self.puf,
                &self.puf_config,
                self.derivation_seed,
            )?;
            install(&mut self.table, fabric, target, challenge, token)?;
        }
        self.table.integrity.insert(target, new_level);
        fabric
            .wrapper_mut(target)
            .ok_or(ControllerError::Routing(target))?
            .set_integrity(new_level);
        Ok(())
    }

    /// Administrative recovery of a latched channel. Not reachable from
    /// bus traffic.
    pub fn re_enable(&mut self, target: IpCoreId) -> Result<(), ControllerError> {
        let ch = self
            .table
            .channels
            .get_mut(&target)
            .ok_or(ControllerError::Routing(target))?;
        *ch = ChannelState::Enabled;
        Ok(())
    }

    pub fn log(&self) -> &[EventLogEntry] {
        &self.log
    }

    pub fn query_log(&self, filter: Option<&LogFilter>) -> Vec<&EventLogEntry> {
        self.query_log_by(|e| filter.is_none_or(|f| f.matches(e)))
    }

    pub fn query_log_by<P: Fn(&EventLogEntry) -> bool>(&self, predicate: P) -> Vec<&EventLogEntry> {
        self.log.iter().filter(|e| predicate(e)).collect()
    }

    /// One line per entry under [`LOG_HEADER`].
    pub fn export_log(&self) -> String {
        export_entries(self.log.iter())
    }
}

pub fn export_entries<'a, I: IntoIterator<Item = &'a EventLogEntry>>(entries: I) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{LOG_HEADER}");
    for e in entries {
        let _ = writeln!(out, "{e}");
    }
    out
}
