use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lipstab_cli::{run, Command};

/// Robust stability certificates and Lipschitz-capped controller training.
#[derive(Parser)]
#[command(name = "lipstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Run configuration (defaults to the shipped example for reproduce-example).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides LIPSTAB_OUT_DIR and the configuration.
    #[arg(short, long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Bound the Jacobian sector for the gain in [sector].
    BoundSector,
    /// Search for a gain, Lipschitz budget and safe ellipsoid.
    Synthesize,
    /// Certify the gain and budget in [certify].
    Certify,
    /// Train the actor inside the certified budget.
    Train {
        /// Synthesize again instead of loading certificate.txt.
        #[arg(long)]
        fresh: bool,
    },
    /// Compare the trained policy with the nominal gain and LQR.
    Evaluate {
        /// Rerun synthesis and training instead of loading artifacts.
        #[arg(long)]
        fresh: bool,
    },
    /// Run the whole pipeline on the example configuration.
    ReproduceExample,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::BoundSector => Command::BoundSector,
        Cmd::Synthesize => Command::Synthesize,
        Cmd::Certify => Command::Certify,
        Cmd::Train { fresh } => Command::Train { fresh },
        Cmd::Evaluate { fresh } => Command::Evaluate { fresh },
        Cmd::ReproduceExample => Command::ReproduceExample,
    };
    match run(command, cli.config.as_deref(), cli.out_dir.as_deref()) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
