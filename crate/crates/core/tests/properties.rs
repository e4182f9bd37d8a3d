// Licensed under the Apache-2.0 license

use proptest::prelude::*;
use trusttoken_core::controller::{ChannelState, Controller, LogFilter};
use trusttoken_core::fabric::{
    garbage_token, present_transaction, AppId, BusOp, BusTransaction, Decision, Fabric, Initiator,
    IntegrityLevel, IpCoreId, Reason, Topology,
};
use trusttoken_core::puf::{new_device, PufConfig};
use trusttoken_core::scenarios::{all_scenarios, run_scenario, ActionClass};

fn provisioned(seed: u64, topology: &Topology) -> (Fabric, Controller) {
    let config = PufConfig::default();
    let mut fabric = topology.build(seed).unwrap();
    let puf = new_device(seed, &config).unwrap();
    let ctl = Controller::provision(&mut fabric, puf, config, seed).unwrap();
    (fabric, ctl)
}

#[derive(Debug, Clone)]
struct RandomTxn {
    source: Initiator,
    dest: u8,
    id: u8,
    token: u8,
    op: BusOp,
}

fn random_txn() -> impl Strategy<Value = RandomTxn> {
    let source = prop_oneof![
        (1u8..=5).prop_map(|a| Initiator::App(AppId(a))),
        (1u8..=4).prop_map(|c| Initiator::Core(IpCoreId(c))),
    ];
    (source, 1u8..=4, 1u8..=4, 0u8..6, any::<bool>()).prop_map(
        |(source, dest, id, token, write)| RandomTxn {
            source,
            dest,
            id,
            token,
            op: if write { BusOp::Write } else { BusOp::Read },
        },
    )
}

/// Token choice 0 = absent, 1..=4 = that core's wrapper token, 5 = garbage.
fn materialize(t: &RandomTxn, fabric: &Fabric, seed: u64) -> BusTransaction {
    let token_signal = match t.token {
        0 => None,
        5 => Some(garbage_token(256, seed)),
        c => fabric.wrapper(IpCoreId(c)).unwrap().stored_token().cloned(),
    };
    BusTransaction {
        source: t.source,
        dest: IpCoreId(t.dest),
        op: t.op,
        address: 4,
        data: 9,
        id_signal: IpCoreId(t.id),
        token_signal,
        ar_integrity: IntegrityLevel::Low,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn suite_never_breaches_and_never_falsely_denies(seed in any::<u64>()) {
        for s in all_scenarios() {
            let out = run_scenario(&s, seed).unwrap();
            prop_assert!(out.passed, "{}", out.to_text());
            prop_assert_eq!(out.breaches(), 0);
            prop_assert_eq!(out.false_denials(), 0);
        }
    }

    /// Stub calls on a core happen exactly once per grant to it, and every
    /// grant is logged.
    #[test]
    fn mediation_is_complete(seed in any::<u64>(), txns in proptest::collection::vec(random_txn(), 1..60)) {
        let (mut fabric, mut ctl) = provisioned(seed, &Topology::reference());
        let mut delivered = 0usize;
        for (tick, t) in txns.iter().enumerate() {
            let txn = materialize(t, &fabric, seed ^ tick as u64);
            let r = ctl.handle_transaction(&mut fabric, txn, tick as u64).unwrap();
            prop_assert_eq!(r.data_out.is_some(), r.decision == Decision::Granted);
            prop_assert_eq!(r.reason == Reason::Ok, r.decision == Decision::Granted);
            delivered += usize::from(r.data_out.is_some());
        }
        prop_assert_eq!(ctl.log().len(), txns.len());
        let grants = ctl.query_log(Some(&LogFilter::decision(Decision::Granted)));
        prop_assert_eq!(grants.len(), delivered);
        for core in fabric.core_ids().collect::<Vec<_>>() {
            let to_core = grants.iter().filter(|e| e.transaction.dest == core).count() as u64;
            prop_assert_eq!(fabric.wrapper(core).unwrap().core().compute_calls(), to_core);
        }
    }

    /// Once a token mismatch latches a channel, nothing gets through until
    /// the administrative re-enable.
    #[test]
    fn denial_latches(seed in any::<u64>(), txns in proptest::collection::vec(random_txn(), 1..40)) {
        let (mut fabric, mut ctl) = provisioned(seed, &Topology::reference());
        let victim = IpCoreId(4);
        let mut bad = present_transaction(AppId(4).into(), victim, BusOp::Read, 0, 0, fabric.wrapper(victim).unwrap());
        bad.token_signal = Some(garbage_token(256, seed));
        prop_assert_eq!(ctl.handle_transaction(&mut fabric, bad, 0).unwrap().reason, Reason::TokenMismatch);
        for t in txns.iter().filter(|t| t.dest == victim.0) {
            let txn = materialize(t, &fabric, seed);
            prop_assert_eq!(ctl.handle_transaction(&mut fabric, txn, 1).unwrap().reason, Reason::ChannelDisabled);
        }
        prop_assert_eq!(ctl.table().channel(victim), Some(ChannelState::Disabled));
        ctl.re_enable(victim).unwrap();
        let honest = present_transaction(AppId(4).into(), victim, BusOp::Read, 0, 0, fabric.wrapper(victim).unwrap());
        prop_assert!(ctl.handle_transaction(&mut fabric, honest, 2).unwrap().decision == Decision::Granted);
    }

    /// Cycle contract over random traffic with mixed integrity levels.
    #[test]
    fn cycles_follow_table_level(seed in any::<u64>(), low in proptest::collection::vec(any::<bool>(), 4), txns in proptest::collection::vec(random_txn(), 1..40)) {
        let mut topology = Topology::reference();
        for (c, l) in topology.cores.iter_mut().zip(&low) {
            if *l {
                c.integrity = IntegrityLevel::Low;
            }
        }
        let (mut fabric, mut ctl) = provisioned(seed, &topology);
        for t in &txns {
            let txn = materialize(t, &fabric, seed);
            let level = ctl.table().integrity(txn.dest).unwrap();
            let r = ctl.handle_transaction(&mut fabric, txn, 0).unwrap();
            prop_assert_eq!(r.cycles, if level == IntegrityLevel::High { 2 } else { 1 });
        }
    }
}

#[test]
fn attacks_are_denied_at_a_fixed_seed() {
    for s in all_scenarios() {
        let out = run_scenario(&s, 5).unwrap();
        for r in out
            .per_action
            .iter()
            .filter(|r| r.class == ActionClass::Attack)
        {
            assert_ne!(
                r.observed.decision,
                Decision::Granted,
                "{}: {}",
                s.name,
                r.label
            );
        }
    }
}
