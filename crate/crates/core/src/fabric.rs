// Licensed under the Apache-2.0 license

//! The multi-tenant SoC surface: stub IP cores, their security wrappers and
//! the APB-style transactions that carry identity, token and integrity
//! signals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::puf::PufResponse;
use crate::seed::{domain, mix_seed, splitmix64};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FabricError {
    #[error("duplicate core id {0}")]
    DuplicateCore(IpCoreId),
    #[error("duplicate application id {0}")]
    DuplicateApp(AppId),
    #[error("binding {app} -> {core} references an undeclared {what}")]
    DanglingBinding {
        app: AppId,
        core: IpCoreId,
        what: &'static str,
    },
    #[error("cannot parse {0:?}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IpCoreId(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AppId(pub u8);

impl fmt::Display for IpCoreId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "core:{}", self.0)
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "app:{}", self.0)
    }
}

/// Whoever issues a bus transaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Initiator {
    App(AppId),
    Core(IpCoreId),
}

impl fmt::Display for Initiator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initiator::App(a) => a.fmt(f),
            Initiator::Core(c) => c.fmt(f),
        }
    }
}

impl FromStr for Initiator {
    type Err = FabricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || FabricError::Parse(s.to_string());
        let (kind, n) = s.split_once(':').ok_or_else(err)?;
        let n: u8 = n.parse().map_err(|_| err())?;
        match kind {
            "app" => Ok(Initiator::App(AppId(n))),
            "core" => Ok(Initiator::Core(IpCoreId(n))),
            _ => Err(err()),
        }
    }
}

impl From<AppId> for Initiator {
    fn from(a: AppId) -> Self {
        Initiator::App(a)
    }
}

impl From<IpCoreId> for Initiator {
    fn from(c: IpCoreId) -> Self {
        Initiator::Core(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IpKind {
    Aes,
    Des,
    Trng,
    Rsa,
}

impl IpKind {
    pub const ALL: [IpKind; 4] = [IpKind::Aes, IpKind::Des, IpKind::Trng, IpKind::Rsa];

    fn tag(self) -> u64 {
        match self {
            IpKind::Aes => 0xae5,
            IpKind::Des => 0xde5,
            IpKind::Trng => 0x7e9,
            IpKind::Rsa => 0x45a,
        }
    }
}

impl fmt::Display for IpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IpKind::Aes => "AES",
            IpKind::Des => "DES",
            IpKind::Trng => "TRNG",
            IpKind::Rsa => "RSA",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IntegrityLevel {
    High,
    Low,
}

impl fmt::Display for IntegrityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntegrityLevel::High => "HIGH",
            IntegrityLevel::Low => "LOW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BusOp {
    Read,
    Write,
}

impl fmt::Display for BusOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BusOp::Read => "READ",
            BusOp::Write => "WRITE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Decision {
    Granted,
    Denied,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Granted => "GRANTED",
            Decision::Denied => "DENIED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Reason {
    Ok,
    TokenMismatch,
    IdMismatch,
    BindingViolation,
    ChannelDisabled,
    IntegrityTamper,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Ok => "OK",
            Reason::TokenMismatch => "TOKEN_MISMATCH",
            Reason::IdMismatch => "ID_MISMATCH",
            Reason::BindingViolation => "BINDING_VIOLATION",
            Reason::ChannelDisabled => "CHANNEL_DISABLED",
            Reason::IntegrityTamper => "INTEGRITY_TAMPER",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-core register state behind the stub.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoreState {
    regs: BTreeMap<u32, u32>,
    trng_seed: u64,
    trng_counter: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpCore {
    id: IpCoreId,
    kind: IpKind,
    integrity_level: IntegrityLevel,
    state: CoreState,
    compute_calls: u64,
}

impl IpCore {
    pub fn new(
        id: IpCoreId,
        kind: IpKind,
        integrity_level: IntegrityLevel,
        stub_seed: u64,
    ) -> Self {
        let state = CoreState {
            trng_seed: mix_seed(
                domain::STUB ^ stub_seed,
                (kind.tag() << 8) | u64::from(id.0),
            ),
            ..CoreState::default()
        };
        Self {
            id,
            kind,
            integrity_level,
            state,
            compute_calls: 0,
        }
    }

    pub fn id(&self) -> IpCoreId {
        self.id
    }

    pub fn kind(&self) -> IpKind {
        self.kind
    }

    pub fn integrity_level(&self) -> IntegrityLevel {
        self.integrity_level
    }

    pub fn state(&self) -> &CoreState {
        &self.state
    }

    /// How many times [`ip_compute`] has run on this core.
    pub fn compute_calls(&self) -> u64 {
        self.compute_calls
    }
}

const MIX_ODD: u32 = 0x2c1b_3c6d;

fn mix_params(kind: IpKind, id: IpCoreId) -> (u32, u32, u32) {
    let h = splitmix64((kind.tag() << 8) | u64::from(id.0));
    let key = h as u32;
    // Odd multiplier keeps the map a bijection on u32.
    let mult = ((h >> 32) as u32) | 1;
    let rot = (h >> 59) as u32 | 1;
    (key, mult, rot)
}

fn unshift_right(y: u32, s: u32) -> u32 {
    let mut x = y;
    for _ in 0..32 / s + 1 {
        x = y ^ (x >> s);
    }
    x
}

fn mul_inverse(a: u32) -> u32 {
    let mut inv = a;
    for _ in 0..5 {
        inv = inv.wrapping_mul(2u32.wrapping_sub(a.wrapping_mul(inv)));
    }
    inv
}

/// Keyed invertible 32-bit mixing used by the cipher stubs.
pub fn mix(kind: IpKind, id: IpCoreId, x: u32) -> u32 {
    let (key, mult, rot) = mix_params(kind, id);
    let mut x = x ^ key;
    x = x.wrapping_mul(mult);
    x ^= x >> 16;
    x = x.rotate_left(rot);
    x = x.wrapping_mul(MIX_ODD);
    x ^ (x >> 13)
}

/// Inverse of [`mix`].
pub fn unmix(kind: IpKind, id: IpCoreId, y: u32) -> u32 {
    let (key, mult, rot) = mix_params(kind, id);
    let mut x = unshift_right(y, 13);
    x = x.wrapping_mul(mul_inverse(MIX_ODD));
    x = x.rotate_right(rot);
    x = unshift_right(x, 16);
    x = x.wrapping_mul(mul_inverse(mult));
    x ^ key
}

/// Behavioral stub for a core. Cipher cores store WRITE data per address and
/// return the mixed register on READ (unwritten registers read as their
/// address). The TRNG returns successive words of a seeded counter stream;
/// WRITE folds the data into its seed.
pub fn ip_compute(core: &mut IpCore, op: BusOp, address: u32, data: u32) -> u32 {
    core.compute_calls += 1;
    let (kind, id) = (core.kind, core.id);
    let state = &mut core.state;
    match (kind, op) {
        (IpKind::Trng, BusOp::Read) => {
            let word = splitmix64(mix_seed(state.trng_seed, state.trng_counter));
            state.trng_counter += 1;
            (word ^ (word >> 32)) as u32
        }
        (IpKind::Trng, BusOp::Write) => {
            state.trng_seed = mix_seed(state.trng_seed, u64::from(data));
            data
        }
        (_, BusOp::Write) => {
            state.regs.insert(address, data);
            mix(kind, id, data)
        }
        (_, BusOp::Read) => mix(
            kind,
            id,
            state.regs.get(&address).copied().unwrap_or(address),
        ),
    }
}

/// Security shell around one core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustWrapper {
    core: IpCore,
    stored_token: Option<PufResponse>,
    ar_integrity: IntegrityLevel,
}

impl TrustWrapper {
    fn new(core: IpCore) -> Self {
        let ar_integrity = core.integrity_level;
        Self {
            core,
            stored_token: None,
            ar_integrity,
        }
    }

    pub fn core(&self) -> &IpCore {
        &self.core
    }

    pub(crate) fn core_mut(&mut self) -> &mut IpCore {
        &mut self.core
    }

    pub fn stored_token(&self) -> Option<&PufResponse> {
        self.stored_token.as_ref()
    }

    pub fn ar_integrity(&self) -> IntegrityLevel {
        self.ar_integrity
    }

    pub(crate) fn install_token(&mut self, token: PufResponse) {
        self.stored_token = Some(token);
    }

    /// Updates the core level and the wrapper mirror together.
    pub(crate) fn set_integrity(&mut self, level: IntegrityLevel) {
        self.core.integrity_level = level;
        self.ar_integrity = level;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreSpec {
    pub id: IpCoreId,
    pub kind: IpKind,
    pub integrity: IntegrityLevel,
}

/// Declarative fabric description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub cores: Vec<CoreSpec>,
    pub apps: Vec<AppId>,
    pub bindings: Vec<(AppId, IpCoreId)>,
}

pub const AES: IpCoreId = IpCoreId(1);
pub const DES: IpCoreId = IpCoreId(2);
pub const TRNG: IpCoreId = IpCoreId(3);
pub const RSA: IpCoreId = IpCoreId(4);

impl Topology {
    /// Four HIGH-integrity crypto cores, five applications, application `i`
    /// bound to core `i` for `i` in 1..=4 and application 5 unbound.
    pub fn reference() -> Self {
        let cores = IpKind::ALL
            .iter()
            .enumerate()
            .map(|(i, &kind)| CoreSpec {
                id: IpCoreId(i as u8 + 1),
                kind,
                integrity: IntegrityLevel::High,
            })
            .collect();
        Self {
            cores,
            apps: (1..=5).map(AppId).collect(),
            bindings: (1..=4).map(|i| (AppId(i), IpCoreId(i))).collect(),
        }
    }

    /// The reference topology with application 5 sharing the AES core, so
    /// every application has a bound core.
    pub fn legit() -> Self {
        let mut t = Self::reference();
        t.bindings.push((AppId(5), AES));
        t
    }

    pub fn build(&self, stub_seed: u64) -> Result<Fabric, FabricError> {
        Fabric::new(&self.cores, &self.apps, &self.bindings, stub_seed)
    }
}

impl Default for Topology {
    fn default() -> Self {
        Self::legit()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fabric {
    wrappers: BTreeMap<IpCoreId, TrustWrapper>,
    apps: BTreeSet<AppId>,
    bindings: BTreeSet<(AppId, IpCoreId)>,
}

/// Builds a fabric with stub seed 0. Wrappers start without tokens.
pub fn make_fabric(
    cores: &[CoreSpec],
    apps: &[AppId],
    bindings: &[(AppId, IpCoreId)],
) -> Result<Fabric, FabricError> {
    Fabric::new(cores, apps, bindings, 0)
}

impl Fabric {
    pub fn new(
        cores: &[CoreSpec],
        apps: &[AppId],
        bindings: &[(AppId, IpCoreId)],
        stub_seed: u64,
    ) -> Result<Self, FabricError> {
        let mut wrappers = BTreeMap::new();
        for c in cores {
            let core = IpCore::new(c.id, c.kind, c.integrity, stub_seed);
            if wrappers.insert(c.id, TrustWrapper::new(core)).is_some() {
                return Err(FabricError::DuplicateCore(c.id));
            }
        }
        let mut app_set = BTreeSet::new();
        for &a in apps {
            if !app_set.insert(a) {
                return Err(FabricError::DuplicateApp(a));
            }
        }
        for &(app, core) in bindings {
            if !app_set.contains(&app) {
                return Err(FabricError::DanglingBinding {
                    app,
                    core,
                    what: "application",
                });
            }
            if !wrappers.contains_key(&core) {
                return Err(FabricError::DanglingBinding {
                    app,
                    core,
                    what: "core",
                });
            }
        }
        Ok(Self {
            wrappers,
            apps: app_set,
            bindings: bindings.iter().copied().collect(),
        })
    }

    pub fn wrapper(&self, id: IpCoreId) -> Option<&TrustWrapper> {
        self.wrappers.get(&id)
    }

    pub(crate) fn wrapper_mut(&mut self, id: IpCoreId) -> Option<&mut TrustWrapper> {
        self.wrappers.get_mut(&id)
    }

    pub fn wrappers(&self) -> impl Iterator<Item = &TrustWrapper> {
        self.wrappers.values()
    }

    pub fn core_ids(&self) -> impl Iterator<Item = IpCoreId> + '_ {
        self.wrappers.keys().copied()
    }

    pub fn apps(&self) -> impl Iterator<Item = AppId> + '_ {
        self.apps.iter().copied()
    }

    pub fn has_app(&self, app: AppId) -> bool {
        self.apps.contains(&app)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (AppId, IpCoreId)> + '_ {
        self.bindings.iter().copied()
    }

    /// Whether `initiator` is declared in this fabric.
    pub fn knows(&self, initiator: Initiator) -> bool {
        match initiator {
            Initiator::App(a) => self.apps.contains(&a),
            Initiator::Core(c) => self.wrappers.contains_key(&c),
        }
    }
}

/// One APB-style access plus the identity, token and integrity signals. The
/// presented signals are whatever the issuer put on the bus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusTransaction {
    pub source: Initiator,
    pub dest: IpCoreId,
    pub op: BusOp,
    pub address: u32,
    pub data: u32,
    pub id_signal: IpCoreId,
    pub token_signal: Option<PufResponse>,
    pub ar_integrity: IntegrityLevel,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionResult {
    pub decision: Decision,
    pub reason: Reason,
    pub data_out: Option<u32>,
    pub cycles: u8,
}

/// Honest path: the signals are copied from `wrapper`.
pub fn present_transaction(
    source: Initiator,
    dest: IpCoreId,
    op: BusOp,
    address: u32,
    data: u32,
    wrapper: &TrustWrapper,
) -> BusTransaction {
    BusTransaction {
        source,
        dest,
        op,
        address,
        data,
        id_signal: wrapper.core.id,
        token_signal: wrapper.stored_token.clone(),
        ar_integrity: wrapper.ar_integrity,
    }
}

/// A token of `width` random bits, for forged transactions.
pub fn garbage_token(width: usize, seed: u64) -> PufResponse {
    let mut rng = crate::seed::rng(domain::GARBAGE, seed);
    PufResponse::random(width, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_topology_is_valid() {
        let t = Topology::reference();
        let f = make_fabric(&t.cores, &t.apps, &t.bindings).unwrap();
        assert_eq!(f.wrappers().count(), 4);
        assert_eq!(f.apps().count(), 5);
        assert!(f
            .wrappers()
            .all(|w| w.stored_token().is_none() && w.ar_integrity() == IntegrityLevel::High));
        assert!(!f.bindings().any(|(a, _)| a == AppId(5)));
        let kinds: Vec<_> = f.wrappers().map(|w| w.core().kind()).collect();
        assert_eq!(kinds, IpKind::ALL);
    }

    #[test]
    fn empty_fabric_is_valid() {
        let f = make_fabric(&[], &[], &[]).unwrap();
        assert_eq!(f.wrappers().count(), 0);
    }

    #[test]
    fn topology_errors() {
        let c = |id, kind| CoreSpec {
            id: IpCoreId(id),
            kind,
            integrity: IntegrityLevel::High,
        };
        assert_eq!(
            make_fabric(&[c(3, IpKind::Aes), c(3, IpKind::Des)], &[], &[]),
            Err(FabricError::DuplicateCore(IpCoreId(3)))
        );
        assert!(matches!(
            make_fabric(
                &[c(1, IpKind::Aes)],
                &[AppId(1)],
                &[(AppId(1), IpCoreId(2))]
            ),
            Err(FabricError::DanglingBinding { what: "core", .. })
        ));
        assert!(matches!(
            make_fabric(&[c(1, IpKind::Aes)], &[], &[(AppId(1), IpCoreId(1))]),
            Err(FabricError::DanglingBinding {
                what: "application",
                ..
            })
        ));
        assert_eq!(
            make_fabric(&[], &[AppId(1), AppId(1)], &[]),
            Err(FabricError::DuplicateApp(AppId(1)))
        );
    }

    #[test]
    fn trng_reads_advance() {
        let mut core = IpCore::new(TRNG, IpKind::Trng, IntegrityLevel::High, 5);
        let a = ip_compute(&mut core, BusOp::Read, 0x10, 0);
        let b = ip_compute(&mut core, BusOp::Read, 0x10, 0);
        assert_ne!(a, b);
        let mut again = IpCore::new(TRNG, IpKind::Trng, IntegrityLevel::High, 5);
        assert_eq!(ip_compute(&mut again, BusOp::Read, 0x10, 0), a);
        assert_eq!(ip_compute(&mut again, BusOp::Read, 0x10, 0), b);
        assert_eq!(core.compute_calls(), 2);
    }

    #[test]
    fn aes_mixing_inverts_on_many_inputs() {
        let mut rng = crate::seed::rng(0, 1);
        for _ in 0..10_000 {
            let x = rand::Rng::random::<u32>(&mut rng);
            for kind in IpKind::ALL {
                assert_eq!(unmix(kind, AES, mix(kind, AES, x)), x);
            }
        }
    }

    #[test]
    fn write_then_read_reflects_state() {
        let mut core = IpCore::new(AES, IpKind::Aes, IntegrityLevel::High, 0);
        ip_compute(&mut core, BusOp::Write, 0x40, 0xdead_beef);
        let out = ip_compute(&mut core, BusOp::Read, 0x40, 0);
        assert_eq!(unmix(IpKind::Aes, AES, out), 0xdead_beef);
        let untouched = ip_compute(&mut core, BusOp::Read, 0x44, 0);
        assert_eq!(unmix(IpKind::Aes, AES, untouched), 0x44);
    }

    #[test]
    fn honest_transaction_copies_wrapper() {
        let mut f = Topology::reference().build(0).unwrap();
        let token = PufResponse::from_u64(0b1011, 4);
        f.wrapper_mut(AES).unwrap().install_token(token.clone());
        let t = present_transaction(
            AppId(1).into(),
            AES,
            BusOp::Read,
            0,
            0,
            f.wrapper(AES).unwrap(),
        );
        assert_eq!(t.token_signal.as_ref(), Some(&token));
        assert_eq!(t.id_signal, AES);
        assert_eq!(t.ar_integrity, IntegrityLevel::High);
        let bare = present_transaction(
            AppId(2).into(),
            DES,
            BusOp::Read,
            0,
            0,
            f.wrapper(DES).unwrap(),
        );
        assert_eq!(bare.token_signal, None);
    }

    #[test]
    fn forged_transactions_construct_freely() {
        let t = BusTransaction {
            source: AppId(3).into(),
            dest: RSA,
            op: BusOp::Write,
            address: 0,
            data: 1,
            id_signal: TRNG,
            token_signal: Some(garbage_token(256, 9)),
            ar_integrity: IntegrityLevel::Low,
        };
        assert_eq!(t.token_signal.unwrap().width(), 256);
    }

    #[test]
    fn initiator_text_round_trip() {
        for i in [Initiator::App(AppId(5)), Initiator::Core(IpCoreId(200))] {
            assert_eq!(i.to_string().parse::<Initiator>().unwrap(), i);
        }
        assert!("cpu:1".parse::<Initiator>().is_err());
    }

    proptest! {
        #[test]
        fn stub_outputs_are_pure(seed in any::<u64>(), ops in proptest::collection::vec((any::<bool>(), 0u32..8, any::<u32>()), 1..40)) {
            for kind in IpKind::ALL {
                let mut a = IpCore::new(IpCoreId(7), kind, IntegrityLevel::Low, seed);
                let mut b = a.clone();
                for &(write, addr, data) in &ops {
                    let op = if write { BusOp::Write } else { BusOp::Read };
                    prop_assert_eq!(ip_compute(&mut a, op, addr, data), ip_compute(&mut b, op, addr, data));
                }
                prop_assert_eq!(a.state(), b.state());
            }
        }

        #[test]
        fn mix_is_bijective(x in any::<u32>(), id in any::<u8>()) {
            for kind in IpKind::ALL {
                prop_assert_eq!(unmix(kind, IpCoreId(id), mix(kind, IpCoreId(id), x)), x);
            }
        }
    }
}
