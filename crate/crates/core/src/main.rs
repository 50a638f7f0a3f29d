use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netlq::cli;

#[derive(Parser)]
#[command(
    name = "netlq",
    about = "Distributed LQ consensus experiments for single-integrator networks"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
    /// Directory for trace files
    #[arg(long, default_value = "out", global = true)]
    out_dir: PathBuf,
    /// Suppress the report on stdout
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file
    Run { scenario: PathBuf },
    /// Run a named regression preset (paper-fig1 | paper-fig2)
    Preset { name: String },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scenario = match &args.command {
        Command::Run { scenario } => cli::load_scenario(scenario),
        Command::Preset { name } => cli::preset(name).ok_or_else(|| {
            cli::CliError::Scenario(format!(
                "unknown preset `{name}` (expected paper-fig1 or paper-fig2)"
            ))
        }),
    };
    let result = scenario.and_then(|s| cli::run(&s, &args.out_dir, args.quiet));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
