use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nhl_core::app;
use nhl_core::config::{parse_config, Command};

fn parse_command(s: &str) -> Result<Command, String> {
    Command::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
        format!("unknown command `{s}`; expected one of {}", names.join(", "))
    })
}

/// Non-local heat equation experiments.
#[derive(Parser, Debug)]
#[command(name = "nhl", version)]
struct Cli {
    /// evolve, modulus-verify, spectral-rayleigh, spectral-lambda2,
    /// spectral-counterexample, coupling-check or probe-regional-2d
    #[arg(value_parser = parse_command)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match parse_config(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            app::write_error_report(&e, None, cli.command, &cli.out);
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.set("run.seed", &seed.to_string()).expect("u64 seed is valid");
    }
    match app::run(cli.command, &cfg, &cli.out) {
        Ok(outcome) => {
            print!("{}", outcome.report.render());
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            let report = app::write_error_report(&e, Some(&cfg), cli.command, &cli.out);
            eprintln!("error: {e}");
            eprint!("{}", report.render());
            ExitCode::from(1)
        }
    }
}
