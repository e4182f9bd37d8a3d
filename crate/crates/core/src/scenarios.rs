// Licensed under the Apache-2.0 license

//! Scripted attack and legitimate-flow scenarios, and a single-bit
//! protection baseline (AWPROT-style interconnect check) for comparison.
//!
//! A scenario is a topology plus an ordered script. Every scripted action
//! carries its expected decision; running the script on a fresh fabric and
//! controller yields a [`ScenarioOutcome`] that records expected against
//! observed for each step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::controller::{export_entries, Controller, ControllerError, EventLogEntry};
use crate::fabric::{
    garbage_token, ip_compute, present_transaction, AppId, BusOp, BusTransaction, Decision, Fabric,
    FabricError, Initiator, IntegrityLevel, IpCore, IpCoreId, Reason, Topology, AES, DES, RSA,
    TRNG,
};
use crate::puf::{new_device, PufConfig, PufError, PufResponse};
use crate::seed::{domain, mix_seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("scenario {scenario}: {message}")]
    Validation { scenario: String, message: String },
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error("unknown scenario {0:?}")]
    Unknown(String),
}

/// Who an action is meant to model. Only attacks count towards breaches and
/// only honest actions towards false denials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ActionClass {
    Honest,
    Attack,
    Admin,
    /// Traffic to a core whose isolation was switched off by an authorized
    /// downgrade.
    Unprotected,
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionClass::Honest => "honest",
            ActionClass::Attack => "attack",
            ActionClass::Admin => "admin",
            ActionClass::Unprotected => "unprot",
        })
    }
}

/// Where a token presented by a scripted action comes from. Tokens only
/// exist after provisioning, so scripts name them indirectly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenSource {
    /// Whatever the given core's wrapper currently stores.
    WrapperOf(IpCoreId),
    /// Random bits drawn from the run seed and this tag.
    Garbage(u64),
    Absent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signals {
    /// Honest signal path through the named core's wrapper.
    Wrapper(IpCoreId),
    Forged {
        id: IpCoreId,
        token: TokenSource,
        integrity: IntegrityLevel,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Transact {
        source: Initiator,
        dest: IpCoreId,
        op: BusOp,
        address: u32,
        data: u32,
        signals: Signals,
    },
    SetIntegrity {
        target: IpCoreId,
        level: IntegrityLevel,
        token: TokenSource,
    },
    RaiseIntegrity {
        target: IpCoreId,
    },
    ReEnable {
        target: IpCoreId,
    },
}

impl Action {
    fn target(&self) -> IpCoreId {
        match *self {
            Action::Transact { dest, .. } => dest,
            Action::SetIntegrity { target, .. }
            | Action::RaiseIntegrity { target }
            | Action::ReEnable { target } => target,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Action::Transact {
                source, dest, op, ..
            } => format!("{op} {source}->{dest}"),
            Action::SetIntegrity { target, level, .. } => format!("SET_INTEGRITY {target}={level}"),
            Action::RaiseIntegrity { target } => format!("RAISE_INTEGRITY {target}"),
            Action::ReEnable { target } => format!("RE_ENABLE {target}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Expectation {
    pub decision: Decision,
    /// `None` accepts any reason consistent with `decision`.
    pub reason: Option<Reason>,
}

impl Expectation {
    pub fn granted() -> Self {
        Self {
            decision: Decision::Granted,
            reason: Some(Reason::Ok),
        }
    }

    pub fn denied(reason: Reason) -> Self {
        Self {
            decision: Decision::Denied,
            reason: Some(reason),
        }
    }

    pub fn matches(&self, observed: &Observation) -> bool {
        self.decision == observed.decision && self.reason.is_none_or(|r| r == observed.reason)
    }

    /// The opposite decision with an unconstrained reason.
    pub fn inverted(&self) -> Self {
        match self.decision {
            Decision::Granted => Self {
                decision: Decision::Denied,
                reason: None,
            },
            Decision::Denied => Self::granted(),
        }
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            Some(r) => write!(f, "{}/{}", self.decision, r),
            None => write!(f, "{}/*", self.decision),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptedAction {
    pub label: String,
    pub class: ActionClass,
    pub action: Action,
    pub expect: Expectation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSetup {
    pub topology: Topology,
    pub puf: PufConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub setup: ScenarioSetup,
    pub script: Vec<ScriptedAction>,
}

/// What the controller did with one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub decision: Decision,
    pub reason: Reason,
    /// Authorization cycles; 0 for administrative actions.
    pub cycles: u8,
    /// Controller's integrity level for the target before the action.
    pub level_before: IntegrityLevel,
    /// And after it.
    pub level_after: IntegrityLevel,
    pub data_out: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRecord {
    pub index: usize,
    pub label: String,
    pub class: ActionClass,
    pub target: IpCoreId,
    pub expected: Expectation,
    pub observed: Observation,
}

impl ActionRecord {
    pub fn matched(&self) -> bool {
        self.expected.matches(&self.observed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioOutcome {
    pub name: String,
    pub passed: bool,
    pub per_action: Vec<ActionRecord>,
    pub log_excerpt: Vec<EventLogEntry>,
}

/// Machine-readable counts for one outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSummary {
    pub name: String,
    pub passed: bool,
    pub actions: usize,
    pub attacks: usize,
    pub attack_grants: usize,
    pub honest: usize,
    pub honest_denials: usize,
    pub failed_actions: Vec<usize>,
}

impl ScenarioSummary {
    pub const HEADER: &'static str =
        "name                        passed actions attacks breaches honest false_denials failed";

    pub fn to_line(&self) -> String {
        let failed = if self.failed_actions.is_empty() {
            "-".to_string()
        } else {
            self.failed_actions
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "{:<27} {:<6} {:>7} {:>7} {:>8} {:>6} {:>13} {}",
            self.name,
            self.passed,
            self.actions,
            self.attacks,
            self.attack_grants,
            self.honest,
            self.honest_denials,
            failed
        )
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 8 {
            return None;
        }
        let n = |i: usize| cols[i].parse::<usize>().ok();
        let failed_actions = if cols[7] == "-" {
            Vec::new()
        } else {
            cols[7]
                .split(',')
                .map(|s| s.parse().ok())
                .collect::<Option<Vec<_>>>()?
        };
        Some(Self {
            name: cols[0].to_string(),
            passed: cols[1].parse().ok()?,
            actions: n(2)?,
            attacks: n(3)?,
            attack_grants: n(4)?,
            honest: n(5)?,
            honest_denials: n(6)?,
            failed_actions,
        })
    }
}

impl ScenarioOutcome {
    fn count(&self, class: ActionClass, decision: Decision) -> usize {
        self.per_action
            .iter()
            .filter(|r| r.class == class && r.observed.decision == decision)
            .count()
    }

    /// Attacks the controller granted.
    pub fn breaches(&self) -> usize {
        self.count(ActionClass::Attack, Decision::Granted)
    }

    /// Honest actions the controller denied.
    pub fn false_denials(&self) -> usize {
        self.count(ActionClass::Honest, Decision::Denied)
    }

    pub fn summary(&self) -> ScenarioSummary {
        let of = |c: ActionClass| self.per_action.iter().filter(|r| r.class == c).count();
        ScenarioSummary {
            name: self.name.clone(),
            passed: self.passed,
            actions: self.per_action.len(),
            attacks: of(ActionClass::Attack),
            attack_grants: self.breaches(),
            honest: of(ActionClass::Honest),
            honest_denials: self.false_denials(),
            failed_actions: self
                .per_action
                .iter()
                .filter(|r| !r.matched())
                .map(|r| r.index)
                .collect(),
        }
    }

    /// Per-action table followed by the event log excerpt.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario = {}", self.name);
        let _ = writeln!(out, "passed = {}", self.passed);
        let _ = writeln!(out, "[actions]");
        let _ = writeln!(
            out,
            "{:>4} {:<6} {:<36} {:<25} {:<25} {:>6} {}",
            "idx", "class", "action", "expected", "observed", "cycles", "match"
        );
        for r in &self.per_action {
            let observed = format!("{}/{}", r.observed.decision, r.observed.reason);
            let _ = writeln!(
                out,
                "{:>4} {:<6} {:<36} {:<25} {:<25} {:>6} {}",
                r.index,
                r.class.to_string(),
                r.label,
                r.expected.to_string(),
                observed,
                r.observed.cycles,
                if r.matched() { "ok" } else { "MISMATCH" }
            );
        }
        let _ = writeln!(out, "[log]");
        out.push_str(&export_entries(&self.log_excerpt));
        out
    }
}

fn step(label: &str, class: ActionClass, action: Action, expect: Expectation) -> ScriptedAction {
    let label = if label.is_empty() {
        action.describe()
    } else {
        label.to_string()
    };
    ScriptedAction {
        label,
        class,
        action,
        expect,
    }
}

fn read_via(source: impl Into<Initiator>, dest: IpCoreId, wrapper: IpCoreId) -> Action {
    Action::Transact {
        source: source.into(),
        dest,
        op: BusOp::Read,
        address: 0x10,
        data: 0,
        signals: Signals::Wrapper(wrapper),
    }
}

fn honest_read(app: u8, dest: IpCoreId) -> Action {
    read_via(AppId(app), dest, dest)
}

fn honest_write(app: u8, dest: IpCoreId, data: u32) -> Action {
    Action::Transact {
        source: AppId(app).into(),
        dest,
        op: BusOp::Write,
        address: 0x20,
        data,
        signals: Signals::Wrapper(dest),
    }
}

fn forged(
    source: impl Into<Initiator>,
    dest: IpCoreId,
    op: BusOp,
    id: IpCoreId,
    token: TokenSource,
    integrity: IntegrityLevel,
) -> Action {
    Action::Transact {
        source: source.into(),
        dest,
        op,
        address: 0x10,
        data: 0xbad0_0000,
        signals: Signals::Forged {
            id,
            token,
            integrity,
        },
    }
}

fn reference_setup() -> ScenarioSetup {
    ScenarioSetup {
        topology: Topology::reference(),
        puf: PufConfig::default(),
    }
}

use ActionClass::{Admin, Attack, Honest, Unprotected};
use IntegrityLevel::{High, Low};

pub const LEGIT_FLOW: &str = "legit_flow";
pub const CASE1_ID_SPOOF: &str = "case1_id_spoof";
pub const CASE2_ACCESS_CONTROL_TAMPER: &str = "case2_access_control_tamper";
pub const CASE3_INTEGRITY_TAMPER: &str = "case3_integrity_tamper";
pub const TROJAN_LEAK: &str = "trojan_leak";

/// Registered scenario names, in suite order.
pub const SCENARIO_NAMES: [&str; 5] = [
    LEGIT_FLOW,
    CASE1_ID_SPOOF,
    CASE2_ACCESS_CONTROL_TAMPER,
    CASE3_INTEGRITY_TAMPER,
    TROJAN_LEAK,
];

/// Every application exercises each of its bound cores through the honest
/// wrapper path, on [`Topology::legit`].
pub fn legit_flow() -> Scenario {
    legit_flow_on(Topology::legit())
}

/// [`legit_flow`] over an arbitrary topology: a WRITE and a READ per binding.
pub fn legit_flow_on(topology: Topology) -> Scenario {
    let mut script = Vec::new();
    for (i, &(app, core)) in topology.bindings.iter().enumerate() {
        script.push(step(
            "",
            Honest,
            honest_write(app.0, core, 0x1000 + i as u32),
            Expectation::granted(),
        ));
        script.push(step(
            "",
            Honest,
            honest_read(app.0, core),
            Expectation::granted(),
        ));
    }
    Scenario {
        name: LEGIT_FLOW.into(),
        setup: ScenarioSetup {
            topology,
            puf: PufConfig::default(),
        },
        script,
    }
}

/// Application 3 (bound to TRNG) tries to reach the RSA core by presenting
/// other identities and tokens, including from the TRNG core itself.
pub fn case1_id_spoof() -> Scenario {
    let token = TokenSource::WrapperOf;
    let script = vec![
        step("", Honest, honest_read(3, TRNG), Expectation::granted()),
        step(
            "app:3->core:4 id=RSA tok=TRNG",
            Attack,
            forged(AppId(3), RSA, BusOp::Read, RSA, token(TRNG), High),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step(
            "app:3->core:4 id=TRNG tok=TRNG",
            Attack,
            forged(AppId(3), RSA, BusOp::Read, TRNG, token(TRNG), High),
            Expectation::denied(Reason::ChannelDisabled),
        ),
        step("", Honest, honest_read(3, TRNG), Expectation::granted()),
        step(
            "",
            Admin,
            Action::ReEnable { target: RSA },
            Expectation::granted(),
        ),
        step(
            "app:3->core:4 id=TRNG tok=TRNG",
            Attack,
            forged(AppId(3), RSA, BusOp::Read, TRNG, token(TRNG), High),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step(
            "",
            Admin,
            Action::ReEnable { target: RSA },
            Expectation::granted(),
        ),
        step(
            "app:3->core:4 id=TRNG tok=RSA",
            Attack,
            forged(AppId(3), RSA, BusOp::Read, TRNG, token(RSA), High),
            Expectation::denied(Reason::IdMismatch),
        ),
        step(
            "app:3->core:4 via RSA wrapper",
            Attack,
            read_via(AppId(3), RSA, RSA),
            Expectation::denied(Reason::BindingViolation),
        ),
        step(
            "",
            Admin,
            Action::ReEnable { target: RSA },
            Expectation::granted(),
        ),
        step("", Honest, honest_read(4, RSA), Expectation::granted()),
        step(
            "core:3->core:4 id=TRNG tok=TRNG",
            Attack,
            forged(TRNG, RSA, BusOp::Write, TRNG, token(TRNG), High),
            Expectation::denied(Reason::TokenMismatch),
        ),
    ];
    Scenario {
        name: CASE1_ID_SPOOF.into(),
        setup: reference_setup(),
        script,
    }
}

/// The unbound tenant application rewrites the protection-style signal
/// (ar_integrity LOW) while presenting garbage or no token.
pub fn case2_access_control_tamper() -> Scenario {
    let script = vec![
        step("", Honest, honest_read(4, RSA), Expectation::granted()),
        step(
            "app:5->core:4 ar_int=LOW tok=garbage",
            Attack,
            forged(
                AppId(5),
                RSA,
                BusOp::Read,
                RSA,
                TokenSource::Garbage(1),
                Low,
            ),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step(
            "app:5->core:4 ar_int=LOW tok=absent",
            Attack,
            forged(AppId(5), RSA, BusOp::Read, RSA, TokenSource::Absent, Low),
            Expectation::denied(Reason::ChannelDisabled),
        ),
        step(
            "",
            Admin,
            Action::ReEnable { target: RSA },
            Expectation::granted(),
        ),
        step(
            "app:5->core:1 ar_int=LOW tok=garbage",
            Attack,
            forged(
                AppId(5),
                AES,
                BusOp::Write,
                AES,
                TokenSource::Garbage(2),
                Low,
            ),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step(
            "",
            Admin,
            Action::SetIntegrity {
                target: DES,
                level: Low,
                token: TokenSource::WrapperOf(DES),
            },
            Expectation::granted(),
        ),
        step(
            "app:5->core:2 ar_int=HIGH tok=garbage",
            Unprotected,
            forged(
                AppId(5),
                DES,
                BusOp::Read,
                DES,
                TokenSource::Garbage(3),
                High,
            ),
            Expectation::granted(),
        ),
        step("", Honest, honest_read(4, RSA), Expectation::granted()),
        step("", Honest, honest_read(2, DES), Expectation::granted()),
    ];
    Scenario {
        name: CASE2_ACCESS_CONTROL_TAMPER.into(),
        setup: reference_setup(),
        script,
    }
}

/// Number of replayed token-less downgrade attempts in case 3.
pub const CASE3_REPLAYS: usize = 100;

/// Attempts to downgrade DES without its token, then an authorized
/// downgrade/upgrade cycle.
pub fn case3_integrity_tamper() -> Scenario {
    let tamper = |token| Action::SetIntegrity {
        target: DES,
        level: Low,
        token,
    };
    let garbage = |tag| {
        forged(
            AppId(3),
            DES,
            BusOp::Read,
            DES,
            TokenSource::Garbage(tag),
            Low,
        )
    };
    let mut script = vec![
        step("", Honest, honest_read(2, DES), Expectation::granted()),
        step(
            "SET_INTEGRITY core:2=LOW tok=absent",
            Attack,
            tamper(TokenSource::Absent),
            Expectation::denied(Reason::IntegrityTamper),
        ),
        step(
            "SET_INTEGRITY core:2=LOW tok=garbage",
            Attack,
            tamper(TokenSource::Garbage(7)),
            Expectation::denied(Reason::IntegrityTamper),
        ),
        step(
            "SET_INTEGRITY core:2=LOW tok=AES",
            Attack,
            tamper(TokenSource::WrapperOf(AES)),
            Expectation::denied(Reason::IntegrityTamper),
        ),
    ];
    for _ in 0..CASE3_REPLAYS {
        script.push(step(
            "SET_INTEGRITY core:2=LOW replay",
            Attack,
            tamper(TokenSource::Absent),
            Expectation::denied(Reason::IntegrityTamper),
        ));
    }
    script.extend([
        step(
            "app:3->core:2 tok=garbage",
            Attack,
            garbage(8),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step(
            "",
            Admin,
            Action::ReEnable { target: DES },
            Expectation::granted(),
        ),
        step("", Honest, honest_read(2, DES), Expectation::granted()),
        step(
            "SET_INTEGRITY core:2=LOW tok=DES",
            Admin,
            tamper(TokenSource::WrapperOf(DES)),
            Expectation::granted(),
        ),
        step(
            "app:3->core:2 tok=garbage",
            Unprotected,
            garbage(9),
            Expectation::granted(),
        ),
        step(
            "",
            Admin,
            Action::RaiseIntegrity { target: DES },
            Expectation::granted(),
        ),
        step("", Honest, honest_read(2, DES), Expectation::granted()),
        step(
            "app:3->core:2 tok=garbage",
            Attack,
            garbage(10),
            Expectation::denied(Reason::TokenMismatch),
        ),
    ]);
    Scenario {
        name: CASE3_INTEGRITY_TAMPER.into(),
        setup: reference_setup(),
        script,
    }
}

/// A trojan inside the AES core pushes unsolicited writes onto other
/// channels.
pub fn trojan_leak() -> Scenario {
    let leak = Action::Transact {
        source: AES.into(),
        dest: DES,
        op: BusOp::Write,
        address: 0x30,
        data: 0x7e01_eaaa,
        signals: Signals::Wrapper(DES),
    };
    let script = vec![
        step("", Honest, honest_read(1, AES), Expectation::granted()),
        step(
            "core:1->core:2 WRITE leak",
            Attack,
            leak,
            Expectation::denied(Reason::BindingViolation),
        ),
        step(
            "core:1->core:1 self",
            Honest,
            read_via(AES, AES, AES),
            Expectation::granted(),
        ),
        step(
            "core:1->core:2 WRITE leak",
            Attack,
            leak,
            Expectation::denied(Reason::ChannelDisabled),
        ),
        step(
            "",
            Admin,
            Action::ReEnable { target: DES },
            Expectation::granted(),
        ),
        step(
            "core:1->core:4 WRITE own token",
            Attack,
            forged(
                AES,
                RSA,
                BusOp::Write,
                AES,
                TokenSource::WrapperOf(AES),
                High,
            ),
            Expectation::denied(Reason::TokenMismatch),
        ),
        step("", Honest, honest_read(2, DES), Expectation::granted()),
        step(
            "",
            Honest,
            honest_write(1, AES, 0xa5a5_a5a5),
            Expectation::granted(),
        ),
    ];
    Scenario {
        name: TROJAN_LEAK.into(),
        setup: reference_setup(),
        script,
    }
}

/// The registered scenario called `name`.
pub fn by_name(name: &str) -> Result<Scenario, ScenarioError> {
    Ok(match name {
        LEGIT_FLOW => legit_flow(),
        CASE1_ID_SPOOF => case1_id_spoof(),
        CASE2_ACCESS_CONTROL_TAMPER => case2_access_control_tamper(),
        CASE3_INTEGRITY_TAMPER => case3_integrity_tamper(),
        TROJAN_LEAK => trojan_leak(),
        other => return Err(ScenarioError::Unknown(other.to_string())),
    })
}

pub fn all_scenarios() -> Vec<Scenario> {
    SCENARIO_NAMES
        .iter()
        .map(|n| by_name(n).expect("registered"))
        .collect()
}

impl Scenario {
    /// Replaces the expectation of action `index` by its inverse.
    pub fn invert_expectation(&mut self, index: usize) -> Result<(), ScenarioError> {
        let len = self.script.len();
        let a = self
            .script
            .get_mut(index)
            .ok_or_else(|| ScenarioError::Validation {
                scenario: self.name.clone(),
                message: format!("action {index} out of range (script has {len})"),
            })?;
        a.expect = a.expect.inverted();
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let err = |message: String| ScenarioError::Validation {
            scenario: self.name.clone(),
            message,
        };
        if self.name.trim().is_empty() || self.name.contains(char::is_whitespace) {
            return Err(err("scenario name must be a non-empty identifier".into()));
        }
        self.setup.puf.validate()?;
        let fabric = self.setup.topology.build(0)?;
        let known_core = |c: IpCoreId| fabric.wrapper(c).is_some();
        let token_ok = |t: &TokenSource| match t {
            TokenSource::WrapperOf(c) => known_core(*c),
            _ => true,
        };
        for (i, a) in self.script.iter().enumerate() {
            let ok = match &a.action {
                Action::Transact {
                    source,
                    dest,
                    signals,
                    ..
                } => {
                    fabric.knows(*source)
                        && known_core(*dest)
                        && match signals {
                            Signals::Wrapper(w) => known_core(*w),
                            Signals::Forged { token, .. } => token_ok(token),
                        }
                }
                Action::SetIntegrity { target, token, .. } => {
                    known_core(*target) && token_ok(token)
                }
                Action::RaiseIntegrity { target } | Action::ReEnable { target } => {
                    known_core(*target)
                }
            };
            if !ok {
                return Err(err(format!(
                    "action {i} ({}) references an undeclared core or initiator",
                    a.label
                )));
            }
            let consistent = match (a.expect.decision, a.expect.reason) {
                (_, None) => true,
                (Decision::Granted, Some(r)) => r == Reason::Ok,
                (Decision::Denied, Some(r)) => r != Reason::Ok,
            };
            if !consistent {
                return Err(err(format!(
                    "action {i} ({}) expects {}",
                    a.label, a.expect
                )));
            }
        }
        Ok(())
    }
}

struct Run {
    fabric: Fabric,
    controller: Controller,
    seed: u64,
    width: usize,
}

impl Run {
    fn new(setup: &ScenarioSetup, seed: u64) -> Result<Self, ScenarioError> {
        let mut fabric = setup.topology.build(mix_seed(domain::STUB, seed))?;
        let puf = new_device(seed, &setup.puf)?;
        let controller = Controller::provision(
            &mut fabric,
            puf,
            setup.puf,
            mix_seed(domain::CHALLENGE, seed),
        )?;
        Ok(Self {
            fabric,
            controller,
            seed,
            width: setup.puf.response_width,
        })
    }

    fn token(&self, source: &TokenSource) -> Option<PufResponse> {
        match *source {
            TokenSource::WrapperOf(c) => self
                .fabric
                .wrapper(c)
                .and_then(|w| w.stored_token().cloned()),
            TokenSource::Garbage(tag) => Some(garbage_token(self.width, mix_seed(self.seed, tag))),
            TokenSource::Absent => None,
        }
    }

    fn level(&self, core: IpCoreId) -> IntegrityLevel {
        self.controller.table().integrity(core).unwrap_or(Low)
    }

    fn build_transaction(&self, action: &Action) -> Option<BusTransaction> {
        let Action::Transact {
            source,
            dest,
            op,
            address,
            data,
            signals,
        } = *action
        else {
            return None;
        };
        Some(match signals {
            Signals::Wrapper(w) => present_transaction(
                source,
                dest,
                op,
                address,
                data,
                self.fabric.wrapper(w).expect("validated"),
            ),
            Signals::Forged {
                id,
                token,
                integrity,
            } => BusTransaction {
                source,
                dest,
                op,
                address,
                data,
                id_signal: id,
                token_signal: self.token(&token),
                ar_integrity: integrity,
            },
        })
    }

    fn execute(&mut self, action: &Action, tick: u64) -> Result<Observation, ScenarioError> {
        let target = action.target();
        let level_before = self.level(target);
        let (decision, reason, cycles, data_out) = match *action {
            Action::Transact { .. } => {
                let txn = self.build_transaction(action).expect("transaction action");
                let r = self
                    .controller
                    .handle_transaction(&mut self.fabric, txn, tick)?;
                (r.decision, r.reason, r.cycles, r.data_out)
            }
            Action::SetIntegrity {
                target,
                level,
                token,
            } => {
                let token = self.token(&token);
                let d = self.controller.set_integrity(
                    &mut self.fabric,
                    target,
                    level,
                    token.as_ref(),
                )?;
                (d.decision, d.reason, d.cycles, None)
            }
            Action::RaiseIntegrity { target } => {
                let d = self
                    .controller
                    .raise_integrity_internal(&mut self.fabric, target)?;
                (d.decision, d.reason, d.cycles, None)
            }
            Action::ReEnable { target } => {
                self.controller.re_enable(target)?;
                (Decision::Granted, Reason::Ok, 0, None)
            }
        };
        Ok(Observation {
            decision,
            reason,
            cycles,
            level_before,
            level_after: self.level(target),
            data_out,
        })
    }
}

/// Runs `scenario` on a fresh fabric and controller derived from `seed`.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<ScenarioOutcome, ScenarioError> {
    scenario.validate()?;
    let mut run = Run::new(&scenario.setup, seed)?;
    let mut per_action = Vec::with_capacity(scenario.script.len());
    for (index, a) in scenario.script.iter().enumerate() {
        let observed = run.execute(&a.action, index as u64)?;
        per_action.push(ActionRecord {
            index,
            label: a.label.clone(),
            class: a.class,
            target: a.action.target(),
            expected: a.expect,
            observed,
        });
    }
    Ok(ScenarioOutcome {
        name: scenario.name.clone(),
        passed: per_action.iter().all(ActionRecord::matched),
        per_action,
        log_excerpt: run.controller.log().to_vec(),
    })
}

/// AXI AWPROT bit 1: set for non-secure accesses.
pub const AWPROT_NONSECURE: u8 = 0b010;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineTransaction {
    pub source: Initiator,
    pub dest: IpCoreId,
    pub op: BusOp,
    pub address: u32,
    pub data: u32,
    pub awprot: u8,
}

impl BaselineTransaction {
    pub fn is_secure(&self) -> bool {
        self.awprot & AWPROT_NONSECURE == 0
    }
}

/// Interconnect that protects secure cores with nothing but the presented
/// protection bit. No token state exists anywhere.
#[derive(Debug, Clone)]
pub struct TrustZoneBaseline {
    cores: BTreeMap<IpCoreId, (IpCore, bool)>,
    secure_initiators: BTreeSet<Initiator>,
}

impl TrustZoneBaseline {
    /// HIGH cores become secure-world cores; applications bound to any of
    /// them (and the cores themselves) are secure-world initiators.
    pub fn from_topology(topology: &Topology, stub_seed: u64) -> Self {
        let cores: BTreeMap<_, _> = topology
            .cores
            .iter()
            .map(|c| {
                (
                    c.id,
                    (
                        IpCore::new(c.id, c.kind, c.integrity, stub_seed),
                        c.integrity == High,
                    ),
                )
            })
            .collect();
        let secure_initiators = topology
            .bindings
            .iter()
            .filter(|(_, c)| cores.get(c).is_some_and(|(_, s)| *s))
            .map(|&(a, _)| Initiator::App(a))
            .chain(
                cores
                    .iter()
                    .filter(|(_, (_, s))| *s)
                    .map(|(&id, _)| Initiator::Core(id)),
            )
            .collect();
        Self {
            cores,
            secure_initiators,
        }
    }

    /// What an unmodified bus master would drive.
    pub fn present(
        &self,
        source: Initiator,
        dest: IpCoreId,
        op: BusOp,
        address: u32,
        data: u32,
    ) -> BaselineTransaction {
        let awprot = if self.secure_initiators.contains(&source) {
            0
        } else {
            AWPROT_NONSECURE
        };
        BaselineTransaction {
            source,
            dest,
            op,
            address,
            data,
            awprot,
        }
    }

    /// Grants iff the destination is non-secure or the presented access is
    /// marked secure.
    pub fn decide(
        &mut self,
        txn: &BaselineTransaction,
    ) -> Result<(Decision, Option<u32>), ControllerError> {
        let (core, secure) = self
            .cores
            .get_mut(&txn.dest)
            .ok_or(ControllerError::Routing(txn.dest))?;
        if *secure && !txn.is_secure() {
            return Ok((Decision::Denied, None));
        }
        Ok((
            Decision::Granted,
            Some(ip_compute(core, txn.op, txn.address, txn.data)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonRow {
    pub model: &'static str,
    pub class: ActionClass,
    pub label: String,
    pub decision: Decision,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparisonReport {
    pub seed: u64,
    pub rows: Vec<ComparisonRow>,
    pub trusttoken_log: Vec<EventLogEntry>,
}

pub const BASELINE_MODEL: &str = "baseline";
pub const TRUSTTOKEN_MODEL: &str = "trusttoken";

impl ComparisonReport {
    fn count(&self, model: &str, class: ActionClass, decision: Decision) -> usize {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.class == class && r.decision == decision)
            .count()
    }

    pub fn breaches(&self, model: &str) -> usize {
        self.count(model, Attack, Decision::Granted)
    }

    pub fn honest_total(&self, model: &str) -> usize {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.class == Honest)
            .count()
    }

    pub fn honest_grants(&self, model: &str) -> usize {
        self.count(model, Honest, Decision::Granted)
    }

    pub fn attacks(&self, model: &str) -> usize {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.class == Attack)
            .count()
    }

    /// The baseline is breached and the token controller is not.
    pub fn passed(&self) -> bool {
        self.breaches(BASELINE_MODEL) >= 1
            && self.breaches(TRUSTTOKEN_MODEL) == 0
            && self.honest_grants(BASELINE_MODEL) == self.honest_total(BASELINE_MODEL)
            && self.honest_grants(TRUSTTOKEN_MODEL) == self.honest_total(TRUSTTOKEN_MODEL)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed = {}", self.seed);
        for model in [BASELINE_MODEL, TRUSTTOKEN_MODEL] {
            let _ = writeln!(out, "{model}.attacks = {}", self.attacks(model));
            let _ = writeln!(out, "{model}.breaches = {}", self.breaches(model));
            let _ = writeln!(out, "{model}.honest = {}", self.honest_total(model));
            let _ = writeln!(out, "{model}.honest_grants = {}", self.honest_grants(model));
        }
        let _ = writeln!(out, "passed = {}", self.passed());
        let _ = writeln!(out, "[rows]");
        let _ = writeln!(
            out,
            "{:<10} {:<6} {:<36} {:<8} {}",
            "model", "class", "action", "decision", "reason"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<10} {:<6} {:<36} {:<8} {}",
                r.model,
                r.class.to_string(),
                r.label,
                r.decision.to_string(),
                r.reason
            );
        }
        let _ = writeln!(out, "[log]");
        out.push_str(&export_entries(&self.trusttoken_log));
        out
    }
}

/// Runs the same honest workload and protection-signal tamper against the
/// single-bit baseline and the token controller, both on the reference
/// topology. Each core is targeted once by the unbound application 5.
pub fn compare_models(seed: u64) -> Result<ComparisonReport, ScenarioError> {
    let topology = Topology::reference();
    let setup = ScenarioSetup {
        topology: topology.clone(),
        puf: PufConfig::default(),
    };
    let mut baseline = TrustZoneBaseline::from_topology(&topology, mix_seed(domain::STUB, seed));
    let mut run = Run::new(&setup, seed)?;
    let mut rows = Vec::new();
    let mut tick = 0u64;

    for &(app, core) in &topology.bindings {
        for op in [BusOp::Write, BusOp::Read] {
            let label = format!("{op} {}->{core}", Initiator::App(app));
            let btxn = baseline.present(app.into(), core, op, 0x10, 0x5a5a);
            let (decision, _) = baseline.decide(&btxn)?;
            rows.push(ComparisonRow {
                model: BASELINE_MODEL,
                class: Honest,
                label: label.clone(),
                decision,
                reason: "-".into(),
            });
            let txn = present_transaction(
                app.into(),
                core,
                op,
                0x10,
                0x5a5a,
                run.fabric.wrapper(core).expect("declared"),
            );
            let r = run
                .controller
                .handle_transaction(&mut run.fabric, txn, tick)?;
            tick += 1;
            rows.push(ComparisonRow {
                model: TRUSTTOKEN_MODEL,
                class: Honest,
                label,
                decision: r.decision,
                reason: r.reason.to_string(),
            });
        }
    }

    let attacker = Initiator::App(AppId(5));
    for (i, spec) in topology.cores.iter().enumerate() {
        let core = spec.id;
        let label = format!("WRITE {attacker}->{core} prot-tamper");
        let mut btxn = baseline.present(attacker, core, BusOp::Write, 0x10, 0xdead);
        btxn.awprot &= !AWPROT_NONSECURE;
        let (decision, _) = baseline.decide(&btxn)?;
        rows.push(ComparisonRow {
            model: BASELINE_MODEL,
            class: Attack,
            label: label.clone(),
            decision,
            reason: "-".into(),
        });
        let txn = BusTransaction {
            source: attacker,
            dest: core,
            op: BusOp::Write,
            address: 0x10,
            data: 0xdead,
            id_signal: core,
            token_signal: run.token(&TokenSource::Garbage(100 + i as u64)),
            ar_integrity: Low,
        };
        let r = run
            .controller
            .handle_transaction(&mut run.fabric, txn, tick)?;
        tick += 1;
        rows.push(ComparisonRow {
            model: TRUSTTOKEN_MODEL,
            class: Attack,
            label,
            decision: r.decision,
            reason: r.reason.to_string(),
        });
    }

    Ok(ComparisonReport {
        seed,
        rows,
        trusttoken_log: run.controller.log().to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::LogFilter;

    #[test]
    fn legit_flow_grants_everything() {
        let out = run_scenario(&legit_flow(), 1).unwrap();
        assert!(out.passed, "{}", out.to_text());
        assert_eq!(out.per_action.len(), 10);
        assert!(out
            .per_action
            .iter()
            .all(|r| r.observed.decision == Decision::Granted && r.observed.cycles == 2));
        let apps: BTreeSet<_> = legit_flow()
            .setup
            .topology
            .bindings
            .iter()
            .map(|(a, _)| *a)
            .collect();
        assert_eq!(apps.len(), 5);
    }

    #[test]
    fn case1_denies_every_spoof() {
        let out = run_scenario(&case1_id_spoof(), 3).unwrap();
        assert!(out.passed, "{}", out.to_text());
        assert_eq!(out.breaches(), 0);
        let denied: Vec<u64> = out
            .log_excerpt
            .iter()
            .filter(|e| LogFilter::decision(Decision::Denied).matches(e))
            .map(|e| e.tick)
            .collect();
        let attacks: Vec<u64> = out
            .per_action
            .iter()
            .filter(|r| r.class == Attack)
            .map(|r| r.index as u64)
            .collect();
        assert_eq!(denied, attacks);
        assert_eq!(out.per_action[0].observed.decision, Decision::Granted);
        assert_eq!(out.per_action[3].observed.decision, Decision::Granted);
    }

    #[test]
    fn case2_ignores_presented_integrity() {
        let out = run_scenario(&case2_access_control_tamper(), 3).unwrap();
        assert!(out.passed, "{}", out.to_text());
        let unprot = out
            .per_action
            .iter()
            .find(|r| r.class == Unprotected)
            .unwrap();
        assert_eq!(unprot.observed.cycles, 1);
    }

    #[test]
    fn case3_keeps_level_through_replays() {
        let out = run_scenario(&case3_integrity_tamper(), 3).unwrap();
        assert!(out.passed, "{}", out.to_text());
        let tampers: Vec<_> = out
            .per_action
            .iter()
            .filter(|r| r.class == Attack && r.observed.reason == Reason::IntegrityTamper)
            .collect();
        assert_eq!(tampers.len(), CASE3_REPLAYS + 3);
        assert!(tampers
            .iter()
            .all(|r| r.observed.level_before == High && r.observed.level_after == High));
        let downgrade = out
            .per_action
            .iter()
            .find(|r| r.label == "SET_INTEGRITY core:2=LOW tok=DES")
            .unwrap();
        assert_eq!(downgrade.observed.level_after, Low);
    }

    #[test]
    fn trojan_is_caught_by_binding() {
        let out = run_scenario(&trojan_leak(), 3).unwrap();
        assert!(out.passed, "{}", out.to_text());
        assert_eq!(out.per_action[1].observed.reason, Reason::BindingViolation);
        assert_eq!(out.per_action[2].observed.decision, Decision::Granted);
    }

    #[test]
    fn outcomes_are_deterministic() {
        for s in all_scenarios() {
            assert_eq!(run_scenario(&s, 42).unwrap(), run_scenario(&s, 42).unwrap());
        }
    }

    #[test]
    fn malformed_scenario_is_rejected_before_running() {
        let mut s = case1_id_spoof();
        s.script.push(step(
            "",
            Honest,
            honest_read(9, RSA),
            Expectation::granted(),
        ));
        assert!(matches!(
            run_scenario(&s, 0),
            Err(ScenarioError::Validation { .. })
        ));
        let mut s = legit_flow();
        s.script[0].expect = Expectation {
            decision: Decision::Granted,
            reason: Some(Reason::TokenMismatch),
        };
        assert!(matches!(
            s.validate(),
            Err(ScenarioError::Validation { .. })
        ));
        let mut s = legit_flow();
        s.name = String::new();
        assert!(s.validate().is_err());
        assert!(matches!(by_name("nope"), Err(ScenarioError::Unknown(_))));
    }

    #[test]
    fn inverted_expectation_fails_the_named_action() {
        let mut s = trojan_leak();
        s.invert_expectation(1).unwrap();
        let out = run_scenario(&s, 0).unwrap();
        assert!(!out.passed);
        assert_eq!(out.summary().failed_actions, vec![1]);
        assert!(s.invert_expectation(999).is_err());
    }

    #[test]
    fn baseline_falls_to_protection_tamper() {
        let mut b = TrustZoneBaseline::from_topology(&Topology::reference(), 0);
        let mut txn = b.present(AppId(5).into(), RSA, BusOp::Read, 0, 0);
        assert_eq!(b.decide(&txn).unwrap().0, Decision::Denied);
        txn.awprot = 0;
        assert_eq!(b.decide(&txn).unwrap().0, Decision::Granted);
        let honest = b.present(AppId(4).into(), RSA, BusOp::Read, 0, 0);
        assert!(honest.is_secure());
    }

    #[test]
    fn comparison_shows_the_gap() {
        let r = compare_models(7).unwrap();
        assert!(r.breaches(BASELINE_MODEL) >= 1);
        assert_eq!(r.breaches(TRUSTTOKEN_MODEL), 0);
        assert_eq!(
            r.honest_grants(BASELINE_MODEL),
            r.honest_total(BASELINE_MODEL)
        );
        assert_eq!(
            r.honest_grants(TRUSTTOKEN_MODEL),
            r.honest_total(TRUSTTOKEN_MODEL)
        );
        assert!(r.passed());
        assert_eq!(r.to_text(), compare_models(7).unwrap().to_text());
    }

    #[test]
    fn summary_line_round_trips() {
        let mut s = case3_integrity_tamper();
        s.invert_expectation(2).unwrap();
        s.invert_expectation(5).unwrap();
        let sum = run_scenario(&s, 1).unwrap().summary();
        assert_eq!(ScenarioSummary::parse_line(&sum.to_line()), Some(sum));
    }
}
