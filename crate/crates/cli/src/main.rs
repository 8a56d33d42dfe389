use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use memdiff_cli::{run, Command};

/// Steady states, Hopf analysis and simulation for reaction-diffusion with memory-based diffusion.
#[derive(Debug, Parser)]
#[command(name = "memdiff", version)]
struct Args {
    command: Command,
    /// Scenario for `reproduce` (hopf-switch, no-hopf).
    scenario: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args.command, args.config.as_deref(), args.out.as_deref(), args.scenario.as_deref(), args.threads.max(1)) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
