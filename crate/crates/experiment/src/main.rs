use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use homfluct_experiment::{run_study, ExperimentConfig, StudyKind, OUTPUT_ENV};

/// Fluctuation studies for random conductances on periodic lattices.
#[derive(Parser, Debug)]
#[command(name = "homfluct", version)]
struct Cli {
    #[arg(value_enum)]
    study: StudyKind,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set law.kind=uniform`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the config and the environment.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    let mut cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)?;
    cfg.study = cli.study;
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
        cfg.output_dir = dir.into();
    }
    if let Some(dir) = cli.out {
        cfg.output_dir = dir;
    }
    cfg.validate()?;
    eprintln!("{}", cfg.to_toml());
    let outcome = run_study(&cfg)?;
    println!("{}", outcome.dir.display());
    if let homfluct_experiment::StudySummary::Verify(report) = &outcome.summary {
        for c in &report.checks {
            println!(
                "{} {:<28} discrepancy {:.3e} (threshold {:.1e})",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.discrepancy,
                c.threshold
            );
        }
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
