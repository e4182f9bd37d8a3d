// Licensed under the Apache-2.0 license

//! Subcommand implementations behind the `trusttoken` binary.

pub mod config;
pub mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;
use trusttoken_core::puf::quality_report;
use trusttoken_core::scenarios::{compare_models, run_scenario};

use crate::config::RunConfig;
use crate::report::{RunReport, WindowCheck, CMD_PUF_EVAL};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("invalid {key}: {message}")]
    Validation { key: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const ACCEPTANCE_FAILURE: u8 = 1;
    pub const VALIDATION: u8 = 2;
    pub const IO: u8 = 3;
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => exit::IO,
            _ => exit::VALIDATION,
        }
    }
}

/// Result of a report-producing subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub report: RunReport,
    pub path: PathBuf,
}

impl CommandOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.report.passed {
            exit::SUCCESS
        } else {
            exit::ACCEPTANCE_FAILURE
        }
    }
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            config::parse_config(&text)
        }
    }
}

fn write_report(report: RunReport, path: &Path) -> Result<CommandOutcome, CliError> {
    fs::write(path, report.to_text()).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CommandOutcome {
        report,
        path: path.to_path_buf(),
    })
}

/// Characterizes a simulated PUF population and checks it against the
/// configured windows.
pub fn puf_eval_report(config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let p = &config.population;
    let q = quality_report(
        p.device_count,
        &config.challenges(),
        p.trial_count,
        config.seed,
        &config.puf,
    )
    .map_err(|e| CliError::Simulation(e.to_string()))?;
    let w = &config.windows;
    let check = |name: &str, value: f64, lo: f64, hi: f64| WindowCheck {
        name: name.into(),
        value,
        lo,
        hi,
    };
    let checks = vec![
        check("uniqueness", q.uniqueness, w.uniqueness[0], w.uniqueness[1]),
        check("uniformity", q.uniformity, w.uniformity[0], w.uniformity[1]),
        check("reliability", q.reliability, w.reliability_min, 1.0),
        check(
            "hd_in_band_fraction",
            q.fraction_within(w.hd_band[0], w.hd_band[1]),
            w.hd_band_min_fraction,
            1.0,
        ),
    ];
    Ok(RunReport::for_puf(config, q, checks))
}

pub fn cmd_puf_eval(config: &RunConfig) -> Result<CommandOutcome, CliError> {
    let report = puf_eval_report(config)?;
    write_report(report, &config.output_path)
}

/// Runs the selected scenarios, plus the baseline comparison when enabled.
pub fn scenarios_report(config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let outcomes = config
        .selected_scenarios()?
        .iter()
        .map(|s| run_scenario(s, config.seed))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    let comparison = config
        .compare
        .then(|| compare_models(config.seed))
        .transpose()
        .map_err(|e| CliError::Simulation(e.to_string()))?;
    Ok(RunReport::for_scenarios(
        config,
        &outcomes,
        comparison.as_ref(),
    ))
}

pub fn cmd_run_scenarios(config: &RunConfig) -> Result<CommandOutcome, CliError> {
    let report = scenarios_report(config)?;
    write_report(report, &config.output_path)
}

/// Consolidates report files into one summary. The result does not depend
/// on the order of `inputs`.
pub fn cmd_report(inputs: &[PathBuf]) -> Result<String, CliError> {
    if inputs.is_empty() {
        return Err(CliError::Usage(
            "report needs at least one input file".into(),
        ));
    }
    let mut reports = Vec::with_capacity(inputs.len());
    for path in inputs {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let r = RunReport::parse(&text).map_err(|message| CliError::Parse {
            path: path.clone(),
            message,
        })?;
        reports.push((path.display().to_string(), r));
    }
    reports.sort_by(|(pa, a), (pb, b)| (&a.command, a.seed, pa).cmp(&(&b.command, b.seed, pb)));

    let mut out = String::new();
    let _ = writeln!(out, "reports = {}", reports.len());
    let _ = writeln!(
        out,
        "overall = {}",
        if reports.iter().all(|(_, r)| r.passed) {
            "PASS"
        } else {
            "FAIL"
        }
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "PUF metrics");
    let _ = writeln!(
        out,
        "{:<32} {:>20} {:>7} {:>10} {:>10} {:>11} {:>10} {}",
        "file",
        "seed",
        "devices",
        "uniqueness",
        "uniformity",
        "reliability",
        "hd_in_band",
        "status"
    );
    for (path, r) in reports.iter().filter(|(_, r)| r.command == CMD_PUF_EVAL) {
        let q = r
            .puf_quality
            .as_ref()
            .expect("puf-eval reports carry metrics");
        let band = r
            .checks
            .iter()
            .find(|c| c.name == "hd_in_band_fraction")
            .map_or(f64::NAN, |c| c.value);
        let _ = writeln!(
            out,
            "{:<32} {:>20} {:>7} {:>10.6} {:>10.6} {:>11.6} {:>10.6} {}",
            path,
            r.seed,
            q.device_count,
            q.uniqueness,
            q.uniformity,
            q.reliability,
            band,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Scenarios");
    let _ = writeln!(
        out,
        "{:<32} {:>20} {:<27} {:<6} {:>8} {:>13} {}",
        "file", "seed", "scenario", "passed", "breaches", "false_denials", "failed"
    );
    for (path, r) in &reports {
        for s in &r.scenario_summaries {
            let failed = if s.failed_actions.is_empty() {
                "-".to_string()
            } else {
                s.failed_actions
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            };
            let _ = writeln!(
                out,
                "{:<32} {:>20} {:<27} {:<6} {:>8} {:>13} {}",
                path, r.seed, s.name, s.passed, s.attack_grants, s.honest_denials, failed
            );
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "Baseline comparison");
    let _ = writeln!(
        out,
        "{:<32} {:>20} {:>17} {:>19} {}",
        "file", "seed", "baseline_breaches", "trusttoken_breaches", "passed"
    );
    for (path, r) in &reports {
        if let Some(c) = r.comparison {
            let _ = writeln!(
                out,
                "{:<32} {:>20} {:>17} {:>19} {}",
                path, r.seed, c.baseline_breaches, c.trusttoken_breaches, c.passed
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn small_config(dir: &Path, name: &str) -> RunConfig {
        let mut c = parse_config("[population]\ndevice_count = 10\ntrial_count = 5\n").unwrap();
        c.output_path = dir.join(name);
        c
    }

    #[test]
    fn puf_report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_puf_eval(&small_config(dir.path(), "p.txt")).unwrap();
        let text = fs::read_to_string(&out.path).unwrap();
        let parsed = RunReport::parse(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
        assert_eq!(parsed.config_echo, out.report.config_echo);
    }

    #[test]
    fn scenario_report_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_run_scenarios(&small_config(dir.path(), "s.txt")).unwrap();
        assert_eq!(out.exit_code(), exit::SUCCESS);
        let text = fs::read_to_string(&out.path).unwrap();
        assert_eq!(RunReport::parse(&text).unwrap().to_text(), text);
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(dir.path(), "x.txt");
        c.output_path = dir.path().join("missing").join("x.txt");
        let err = cmd_puf_eval(&c).unwrap_err();
        assert_eq!(err.exit_code(), exit::IO);
    }

    #[test]
    fn report_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("junk.txt");
        fs::write(&p, "hello\n").unwrap();
        let err = cmd_report(&[p.clone()]).unwrap_err();
        assert!(matches!(&err, CliError::Parse { path, .. } if path == &p));
        assert!(err.to_string().contains("junk.txt"));
        assert!(matches!(cmd_report(&[]), Err(CliError::Usage(_))));
    }
}
