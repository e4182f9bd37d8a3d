// Licensed under the Apache-2.0 license

//! Acceptance suite. Each test checks one criterion at its stated tolerance
//! and prints a single `[PASS]` / `[FAIL]` line. Run with `--nocapture` to
//! see the lines.

use std::collections::BTreeSet;
use std::fs;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use trusttoken_cli::config::RunConfig;
use trusttoken_cli::{
    cmd_puf_eval, cmd_report, cmd_run_scenarios, puf_eval_report, CliError, CommandOutcome,
};
use trusttoken_core::controller::provision;
use trusttoken_core::fabric::{
    make_fabric, AppId, BusOp, BusTransaction, CoreSpec, Decision, Initiator, IntegrityLevel,
    IpCoreId, IpKind,
};
use trusttoken_core::puf::{new_device, quality_report, PufConfig, PufQualityReport, PufResponse};
use trusttoken_core::scenarios::{
    all_scenarios, compare_models, run_scenario, Action, BASELINE_MODEL, TRUSTTOKEN_MODEL,
};

const SEEDS: std::ops::Range<u64> = 1..11;

fn verdict(criterion: u8, title: &str, passed: bool, detail: String) {
    println!(
        "[{}] criterion {criterion}: {title}: {detail}",
        if passed { "PASS" } else { "FAIL" }
    );
    assert!(passed, "criterion {criterion} ({title}) failed: {detail}");
}

/// One default-config population run shared by criteria 1, 2 and 4.
fn default_population() -> &'static (PufQualityReport, Duration) {
    static RUN: OnceLock<(PufQualityReport, Duration)> = OnceLock::new();
    RUN.get_or_init(|| {
        let config = RunConfig::default();
        let start = Instant::now();
        let report = puf_eval_report(&config).expect("default config is valid");
        (
            report.puf_quality.expect("puf-eval carries metrics"),
            start.elapsed(),
        )
    })
}

#[test]
fn criterion_1_uniqueness() {
    let (q, elapsed) = default_population();
    let ok = (0.45..=0.55).contains(&q.uniqueness)
        && *elapsed < Duration::from_secs(10)
        && q.device_count == 100;
    verdict(
        1,
        "uniqueness over 100 devices",
        ok,
        format!(
            "{:.6} in [0.45, 0.55], {} devices, {:.2?} (< 10 s)",
            q.uniqueness, q.device_count, elapsed
        ),
    );
}

#[test]
fn criterion_2_uniformity() {
    let (q, _) = default_population();
    verdict(
        2,
        "uniformity",
        (0.44..=0.56).contains(&q.uniformity),
        format!("{:.6} in [0.44, 0.56]", q.uniformity),
    );
}

#[test]
fn criterion_3_reliability() {
    let (noisy, _) = default_population();
    let config = RunConfig::default();
    let mut quiet_puf = config.puf;
    quiet_puf.sigma_noise = 0.0;
    let quiet = quality_report(10, &config.challenges(), 100, config.seed, &quiet_puf).unwrap();
    let ok = noisy.trial_count == 100 && noisy.reliability >= 0.99 && quiet.reliability == 1.0;
    verdict(
        3,
        "reliability over 100 trials",
        ok,
        format!(
            "{:.6} >= 0.99 with default noise, {:.6} == 1 without noise",
            noisy.reliability, quiet.reliability
        ),
    );
}

#[test]
fn criterion_4_pairwise_hd_band() {
    let (q, _) = default_population();
    let frac = q.fraction_within(0.40, 0.60);
    verdict(
        4,
        "pairwise HD band",
        frac >= 0.95 && q.pairwise_hd.len() == 100 * 99 / 2,
        format!(
            "{:.4} of {} pairs in [0.40, 0.60] (>= 0.95)",
            frac,
            q.pairwise_hd.len()
        ),
    );
}

#[test]
fn criterion_5_scenarios_hold_across_seeds() {
    let start = Instant::now();
    let mut attack_grants = 0;
    let mut honest_denials = 0;
    let mut failed = Vec::new();
    for seed in SEEDS {
        for s in all_scenarios() {
            let out = run_scenario(&s, seed).unwrap();
            attack_grants += out.breaches();
            honest_denials += out.false_denials();
            if !out.passed {
                failed.push(format!("{}@{seed}", out.name));
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        5,
        "attack scenarios over 10 seeds",
        attack_grants == 0 && honest_denials == 0 && failed.is_empty() && elapsed < Duration::from_secs(5),
        format!("{attack_grants} attack grants, {honest_denials} honest denials, failed {failed:?}, {elapsed:.2?} (< 5 s)"),
    );
}

#[test]
fn criterion_6_baseline_is_breached() {
    let mut rows = Vec::new();
    let mut ok = true;
    for seed in SEEDS {
        let r = compare_models(seed).unwrap();
        let (b, t) = (r.breaches(BASELINE_MODEL), r.breaches(TRUSTTOKEN_MODEL));
        ok &= b >= 1
            && t == 0
            && r.honest_grants(TRUSTTOKEN_MODEL) == r.honest_total(TRUSTTOKEN_MODEL);
        rows.push(format!("{b}/{t}"));
    }
    verdict(
        6,
        "baseline vs token controller",
        ok,
        format!("breaches baseline/token per seed {rows:?}"),
    );
}

#[test]
fn criterion_7_mediation_matches_oracle() {
    let start = Instant::now();
    let cores = [
        CoreSpec {
            id: IpCoreId(1),
            kind: IpKind::Aes,
            integrity: IntegrityLevel::High,
        },
        CoreSpec {
            id: IpCoreId(2),
            kind: IpKind::Des,
            integrity: IntegrityLevel::High,
        },
        CoreSpec {
            id: IpCoreId(3),
            kind: IpKind::Trng,
            integrity: IntegrityLevel::Low,
        },
    ];
    let apps = [AppId(1), AppId(2), AppId(3)];
    let bindings = [
        (AppId(1), IpCoreId(1)),
        (AppId(2), IpCoreId(2)),
        (AppId(3), IpCoreId(3)),
        (AppId(3), IpCoreId(1)),
    ];
    let config = PufConfig::with_response_width(4);
    let mut fabric = make_fabric(&cores, &apps, &bindings).unwrap();
    let puf = new_device(77, &config).unwrap();
    let table = provision(&mut fabric, &puf, &config, 5).unwrap();

    let sources: Vec<Initiator> = apps
        .iter()
        .map(|&a| Initiator::App(a))
        .chain(cores.iter().map(|c| Initiator::Core(c.id)))
        .collect();
    let tokens: Vec<Option<PufResponse>> = std::iter::once(None)
        .chain((0..16u64).map(|v| Some(PufResponse::from_u64(v, 4))))
        .collect();

    // Independent oracle: built only from the declaration and the tokens the
    // wrappers were handed.
    let declared = |d: IpCoreId| cores.iter().find(|c| c.id == d).unwrap();
    let oracle = |txn: &BusTransaction| {
        if declared(txn.dest).integrity == IntegrityLevel::Low {
            return true;
        }
        let token_ok =
            txn.token_signal.as_ref() == fabric.wrapper(txn.dest).unwrap().stored_token();
        let bound = match txn.source {
            Initiator::App(a) => bindings.contains(&(a, txn.dest)),
            Initiator::Core(c) => c == txn.dest,
        };
        token_ok && txn.id_signal == txn.dest && bound
    };

    let (mut queries, mut grants, mut mismatches) = (0, 0, Vec::new());
    for source in &sources {
        for dest in cores.iter().map(|c| c.id) {
            for id_signal in cores.iter().map(|c| c.id) {
                for token in &tokens {
                    let txn = BusTransaction {
                        source: *source,
                        dest,
                        op: BusOp::Read,
                        address: 0,
                        data: 0,
                        id_signal,
                        token_signal: token.clone(),
                        ar_integrity: IntegrityLevel::Low,
                    };
                    let granted =
                        table.clone().authorize(&txn).unwrap().decision == Decision::Granted;
                    queries += 1;
                    grants += usize::from(granted);
                    if granted != oracle(&txn) {
                        mismatches.push(format!("{source}->{dest} id={id_signal} token={token:?}"));
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(
        7,
        "exhaustive mediation check (3 cores, 4-bit tokens)",
        mismatches.is_empty() && grants > 0 && elapsed < Duration::from_secs(1),
        format!(
            "{queries} queries, {grants} grants, {} mismatches {:?}, {elapsed:.2?} (< 1 s)",
            mismatches.len(),
            mismatches.first()
        ),
    );
}

#[test]
fn criterion_8_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::default();
    config.population.device_count = 20;
    let mut identical = Vec::new();
    type Command = fn(&RunConfig) -> Result<CommandOutcome, CliError>;
    let commands: [(&str, Command); 2] = [
        ("puf-eval", cmd_puf_eval),
        ("run-scenarios", cmd_run_scenarios),
    ];
    for (name, cmd) in commands {
        config.output_path = dir.path().join(format!("{name}.txt"));
        cmd(&config).unwrap();
        let first = fs::read(&config.output_path).unwrap();
        cmd(&config).unwrap();
        let second = fs::read(&config.output_path).unwrap();
        identical.push((name, first == second && !first.is_empty()));
    }
    let paths = [
        dir.path().join("puf-eval.txt"),
        dir.path().join("run-scenarios.txt"),
    ];
    let forward = cmd_report(&paths).unwrap();
    let reversed = cmd_report(&[paths[1].clone(), paths[0].clone()]).unwrap();
    identical.push(("report", forward == reversed));
    verdict(
        8,
        "byte-identical reports for identical (config, seed)",
        identical.iter().all(|(_, same)| *same),
        format!("{identical:?}"),
    );
}

#[test]
fn criterion_9_cycle_contract() {
    let mut grants = 0;
    let mut levels = BTreeSet::new();
    let mut violations = Vec::new();
    for seed in SEEDS {
        for s in all_scenarios() {
            let out = run_scenario(&s, seed).unwrap();
            for r in &out.per_action {
                let is_reenable = matches!(s.script[r.index].action, Action::ReEnable { .. });
                if r.observed.decision != Decision::Granted || is_reenable {
                    continue;
                }
                grants += 1;
                levels.insert(r.observed.level_before);
                let want = if r.observed.level_before == IntegrityLevel::High {
                    2
                } else {
                    1
                };
                if r.observed.cycles != want {
                    violations.push(format!(
                        "{}#{}@{seed}: {} cycles",
                        s.name, r.index, r.observed.cycles
                    ));
                }
            }
        }
    }
    verdict(
        9,
        "grant latency (HIGH = 2 cycles, LOW = 1)",
        violations.is_empty() && levels.len() == 2,
        format!(
            "{grants} grants across both levels, {} violations {:?}",
            violations.len(),
            violations.first()
        ),
    );
}
