// Licensed under the Apache-2.0 license

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trusttoken_cli::{
    cmd_puf_eval, cmd_report, cmd_run_scenarios, exit, load_config, CliError, CommandOutcome,
};

#[derive(Parser)]
#[command(
    name = "trusttoken",
    version,
    about = "PUF-token SoC access-control simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize a simulated PUF population.
    PufEval(RunArgs),
    /// Run the attack and legitimate-flow scenarios.
    RunScenarios(RunArgs),
    /// Summarize one or more report files.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn run(
    args: RunArgs,
    cmd: fn(&trusttoken_cli::config::RunConfig) -> Result<CommandOutcome, CliError>,
) -> Result<u8, CliError> {
    let mut config = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = args.out {
        config.output_path = out;
    }
    let outcome = cmd(&config)?;
    let status = if outcome.report.passed {
        "PASS"
    } else {
        "FAIL"
    };
    eprintln!(
        "{}: {status} -> {}",
        outcome.report.command,
        outcome.path.display()
    );
    for c in outcome.report.checks.iter().filter(|c| !c.passed()) {
        eprintln!(
            "  window violated: {} = {:.6} not in [{}, {}]",
            c.name, c.value, c.lo, c.hi
        );
    }
    for s in outcome
        .report
        .scenario_summaries
        .iter()
        .filter(|s| !s.passed)
    {
        eprintln!(
            "  scenario {} failed at action(s) {:?}",
            s.name, s.failed_actions
        );
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PufEval(a) => run(a, cmd_puf_eval),
        Command::RunScenarios(a) => run(a, cmd_run_scenarios),
        Command::Report { inputs } => cmd_report(&inputs).map(|s| {
            print!("{s}");
            exit::SUCCESS
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
