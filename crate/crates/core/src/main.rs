use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasedyn::cli;

#[derive(Parser)]
#[command(
    name = "phasedyn",
    version,
    about = "Two-level phase dynamics experiments"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        /// Experiment description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the CSV files and summary.json; created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Print nothing on success.
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, out, quiet } = Args::parse().command;
    let result = cli::load_config(&config).and_then(|c| cli::run(&c, &out));
    match result {
        Ok(summary) => {
            if !quiet {
                for w in &summary.warnings {
                    eprintln!("warning: {w}");
                }
                for (name, value) in &summary.metrics {
                    println!("{name} = {value:e}");
                }
                for path in &summary.outputs {
                    println!("wrote {}", path.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
