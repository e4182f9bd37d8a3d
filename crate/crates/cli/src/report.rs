// Licensed under the Apache-2.0 license

//! Report files. A report is a key/value header followed by sections, each
//! opened by a `== name ==` line:
//!
//! ```text
//! trusttoken-report 1
//! command = puf-eval
//! seed = 1
//! status = PASS
//! == config ==
//! ...TOML echo of the run config...
//! == puf ==
//! ...metrics, then the pairwise HD column...
//! == checks ==
//! ...one line per acceptance window...
//! == end ==
//! ```
//!
//! `run-scenarios` reports carry `scenarios`, one `scenario <name>` section
//! per outcome and an optional `comparison` section instead of `puf` and
//! `checks`. Output bytes depend only on (config, seed).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use trusttoken_core::puf::PufQualityReport;
use trusttoken_core::scenarios::{
    ComparisonReport, ScenarioOutcome, ScenarioSummary, BASELINE_MODEL, TRUSTTOKEN_MODEL,
};

use crate::config::{parse_config, RunConfig};

pub const MAGIC: &str = "trusttoken-report 1";
pub const CMD_PUF_EVAL: &str = "puf-eval";
pub const CMD_RUN_SCENARIOS: &str = "run-scenarios";

#[derive(Debug, Clone, PartialEq)]
pub struct WindowCheck {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl WindowCheck {
    pub fn passed(&self) -> bool {
        (self.lo..=self.hi).contains(&self.value)
    }

    fn to_line(&self) -> String {
        format!(
            "{:<22} {:>9.6} {:>9.6} {:>9.6} {}",
            self.name,
            self.value,
            self.lo,
            self.hi,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }

    fn parse_line(line: &str) -> Option<Self> {
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return None;
        }
        Some(Self {
            name: cols[0].to_string(),
            value: cols[1].parse().ok()?,
            lo: cols[2].parse().ok()?,
            hi: cols[3].parse().ok()?,
        })
    }
}

pub const CHECKS_HEADER: &str = "check                      value        lo        hi result";

/// Headline numbers of a comparison section.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComparisonSummary {
    pub baseline_breaches: usize,
    pub trusttoken_breaches: usize,
    pub passed: bool,
}

impl From<&ComparisonReport> for ComparisonSummary {
    fn from(r: &ComparisonReport) -> Self {
        Self {
            baseline_breaches: r.breaches(BASELINE_MODEL),
            trusttoken_breaches: r.breaches(TRUSTTOKEN_MODEL),
            passed: r.passed(),
        }
    }
}

/// A report as written by `puf-eval` or `run-scenarios`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub seed: u64,
    pub passed: bool,
    pub config_echo: RunConfig,
    pub puf_quality: Option<PufQualityReport>,
    pub checks: Vec<WindowCheck>,
    pub scenario_summaries: Vec<ScenarioSummary>,
    /// Full per-scenario text, keyed by scenario name.
    pub scenario_details: Vec<(String, String)>,
    pub comparison: Option<ComparisonSummary>,
    pub comparison_text: Option<String>,
}

impl RunReport {
    pub fn for_puf(
        config: &RunConfig,
        quality: PufQualityReport,
        checks: Vec<WindowCheck>,
    ) -> Self {
        Self {
            command: CMD_PUF_EVAL.into(),
            seed: config.seed,
            passed: checks.iter().all(WindowCheck::passed),
            config_echo: config.clone(),
            puf_quality: Some(quality),
            checks,
            scenario_summaries: Vec::new(),
            scenario_details: Vec::new(),
            comparison: None,
            comparison_text: None,
        }
    }

    pub fn for_scenarios(
        config: &RunConfig,
        outcomes: &[ScenarioOutcome],
        comparison: Option<&ComparisonReport>,
    ) -> Self {
        let comparison_summary = comparison.map(ComparisonSummary::from);
        Self {
            command: CMD_RUN_SCENARIOS.into(),
            seed: config.seed,
            passed: outcomes.iter().all(|o| o.passed)
                && comparison_summary.is_none_or(|c| c.passed),
            config_echo: config.clone(),
            puf_quality: None,
            checks: Vec::new(),
            scenario_summaries: outcomes.iter().map(ScenarioOutcome::summary).collect(),
            scenario_details: outcomes
                .iter()
                .map(|o| (o.name.clone(), o.to_text()))
                .collect(),
            comparison: comparison_summary,
            comparison_text: comparison.map(ComparisonReport::to_text),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(
            out,
            "status = {}",
            if self.passed { "PASS" } else { "FAIL" }
        );
        let _ = writeln!(out, "== config ==");
        out.push_str(&self.config_echo.to_toml());
        if let Some(q) = &self.puf_quality {
            let _ = writeln!(out, "== puf ==");
            out.push_str(&q.to_text());
        }
        if !self.checks.is_empty() {
            let _ = writeln!(out, "== checks ==");
            let _ = writeln!(out, "{CHECKS_HEADER}");
            for c in &self.checks {
                let _ = writeln!(out, "{}", c.to_line());
            }
        }
        if self.command == CMD_RUN_SCENARIOS {
            let _ = writeln!(out, "== scenarios ==");
            let _ = writeln!(out, "{}", ScenarioSummary::HEADER);
            for s in &self.scenario_summaries {
                let _ = writeln!(out, "{}", s.to_line());
            }
            for (name, text) in &self.scenario_details {
                let _ = writeln!(out, "== scenario {name} ==");
                out.push_str(text);
            }
        }
        if let Some(text) = &self.comparison_text {
            let _ = writeln!(out, "== comparison ==");
            out.push_str(text);
        }
        let _ = writeln!(out, "== end ==");
        out
    }

    /// Parses a report produced by [`to_text`](Self::to_text).
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(format!("missing {MAGIC:?} header"));
        }
        let mut header = BTreeMap::new();
        let mut sections: Vec<(String, Vec<&str>)> = Vec::new();
        for line in lines {
            if let Some(name) = line.strip_prefix("== ").and_then(|l| l.strip_suffix(" ==")) {
                sections.push((name.to_string(), Vec::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push(line);
            } else {
                let (k, v) = line
                    .split_once(" = ")
                    .ok_or_else(|| format!("bad header line {line:?}"))?;
                header.insert(k.to_string(), v.to_string());
            }
        }
        if sections.last().map(|(n, _)| n.as_str()) != Some("end") {
            return Err("report is truncated (no end marker)".into());
        }
        let get = |k: &str| {
            header
                .get(k)
                .cloned()
                .ok_or_else(|| format!("missing header key {k}"))
        };
        let command = get("command")?;
        if command != CMD_PUF_EVAL && command != CMD_RUN_SCENARIOS {
            return Err(format!("unknown command {command:?}"));
        }
        let seed = get("seed")?.parse().map_err(|_| "bad seed".to_string())?;
        let passed = match get("status")?.as_str() {
            "PASS" => true,
            "FAIL" => false,
            other => return Err(format!("bad status {other:?}")),
        };
        let section = |name: &str| {
            sections
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, b)| b.join("\n") + "\n")
        };
        let config_echo = parse_config(&section("config").ok_or("missing config section")?)
            .map_err(|e| format!("config section: {e}"))?;
        let puf_quality = section("puf")
            .map(|t| PufQualityReport::from_text(&t))
            .transpose()
            .map_err(|e| format!("puf section: {e}"))?;
        let checks = match sections.iter().find(|(n, _)| n == "checks") {
            Some((_, body)) => body
                .iter()
                .skip(1)
                .map(|l| WindowCheck::parse_line(l).ok_or_else(|| format!("bad check line {l:?}")))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let scenario_summaries = match sections.iter().find(|(n, _)| n == "scenarios") {
            Some((_, body)) => body
                .iter()
                .skip(1)
                .map(|l| {
                    ScenarioSummary::parse_line(l).ok_or_else(|| format!("bad scenario line {l:?}"))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        let scenario_details = sections
            .iter()
            .filter_map(|(n, b)| {
                n.strip_prefix("scenario ")
                    .map(|name| (name.to_string(), b.join("\n") + "\n"))
            })
            .collect();
        let comparison_text = section("comparison");
        let comparison = comparison_text
            .as_deref()
            .map(parse_comparison)
            .transpose()?;
        Ok(Self {
            command,
            seed,
            passed,
            config_echo,
            puf_quality,
            checks,
            scenario_summaries,
            scenario_details,
            comparison,
            comparison_text,
        })
    }
}

fn parse_comparison(text: &str) -> Result<ComparisonSummary, String> {
    let kv: BTreeMap<&str, &str> = text
        .lines()
        .take_while(|l| !l.starts_with('['))
        .filter_map(|l| l.split_once(" = "))
        .collect();
    let num = |k: &str| -> Result<usize, String> {
        kv.get(k)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| format!("comparison section: bad or missing {k}"))
    };
    Ok(ComparisonSummary {
        baseline_breaches: num("baseline.breaches")?,
        trusttoken_breaches: num("trusttoken.breaches")?,
        passed: kv.get("passed") == Some(&"true"),
    })
}
