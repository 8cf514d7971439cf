use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fredholm_cli::campaign::CampaignKind;
use fredholm_cli::commands::{cmd_campaign, cmd_index, summary_line, StrategyName, EXIT_USAGE};
use fredholm_cli::report::Report;
use fredholm_core::fredholm::EngineOptions;
use fredholm_core::laurent::DEFAULT_MARGIN;

#[derive(Parser)]
#[command(
    name = "fredholm",
    version,
    about = "Certified index computations for Toeplitz-plus-finite operators"
)]
struct Cli {
    /// Residual refinement target.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Truncation size for the lower norm estimate.
    #[arg(long, global = true, default_value_t = 64)]
    trunc: usize,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index of the operator in a description file.
    Index {
        file: PathBuf,
        #[arg(long, default_value = "auto")]
        strategy: StrategyName,
    },
    /// Random property campaign.
    Campaign {
        kind: CampaignKind,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn write_report(path: Option<&PathBuf>, report: &Report) -> Result<(), String> {
    if let Some(path) = path {
        std::fs::write(path, report.to_json()).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            return ExitCode::from(code as u8);
        }
    };
    if !(cli.tol > 0.0 && cli.tol.is_finite()) || cli.trunc == 0 {
        eprintln!("--tol must be positive and --trunc at least 1");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    let opts = EngineOptions {
        tol: cli.tol,
        margin: DEFAULT_MARGIN,
        trunc: cli.trunc,
    };
    let (code, report) = match &cli.command {
        Command::Index { file, strategy } => cmd_index(file, *strategy, &opts),
        Command::Campaign { kind, trials, seed } => cmd_campaign(*kind, *trials, *seed, &opts),
    };
    println!("{}", summary_line(&report));
    for rec in report.records.iter().filter(|r| !r.pass) {
        println!(
            "  trial {} failed: {}",
            rec.trial,
            rec.note.as_deref().unwrap_or("invariant violated")
        );
    }
    if let Err(e) = write_report(cli.report.as_ref(), &report) {
        eprintln!("{e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    ExitCode::from(code as u8)
}
