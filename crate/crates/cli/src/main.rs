use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mixext_cli::commands;
use mixext_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "mixext",
    about = "Dyadic spline quasi-interpolation, whole-space extension and \
             mixed-smoothness norm estimation on the unit cube"
)]
struct Cli {
    /// Configuration file (flat key = value text).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports and data files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Print the default configuration with documentation and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every module's invariant suite and write the JSON report.
    Verify,
    /// Compute a truncated extension and sample it to CSV + JSON.
    Extend,
    /// Emit norm reports and the extension norm-ratio table.
    Norms,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_config {
        print!("{}", ExperimentConfig::documented_defaults());
        return ExitCode::SUCCESS;
    }
    let Some(command) = &cli.command else {
        eprintln!("no subcommand given; try `mixext verify` or `--print-config`");
        return ExitCode::from(2);
    };
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match command {
        Command::Verify => commands::cmd_verify(&cfg, &cli.out),
        Command::Extend => commands::cmd_extend(&cfg, &cli.out),
        Command::Norms => commands::cmd_norms(&cfg, &cli.out),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
