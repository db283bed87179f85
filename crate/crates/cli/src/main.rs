use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfp_cli::commands::{self, Overrides};
use dfp_cli::{exit_code, Exit};

#[derive(Parser)]
#[command(name = "dfp", version, about = "Deep fictitious play for linear-quadratic stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output or artifact directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Concurrent per-player trainings; overrides `run.jobs`.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the contraction diagnostics of the configured game.
    Check {
        #[command(flatten)]
        common: Common,
        /// Exit with a nonzero code when the factor is at least 1.
        #[arg(long)]
        strict: bool,
    },
    /// Run fictitious play and evaluate the result.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate saved checkpoints against the exact equilibrium.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Write the Riccati solution grids as CSV.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            jobs: self.jobs,
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, Exit> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let code = match cli.command {
        Command::Check { common, strict } => {
            let cfg = commands::resolve(&common.config, &common.overrides())?;
            commands::check(&cfg, strict, &mut out)?
        }
        Command::Train { common } => {
            let cfg = commands::resolve(&common.config, &common.overrides())?;
            commands::train(&cfg, &mut out)?;
            exit_code::OK
        }
        Command::Evaluate { common } => {
            let cfg = commands::resolve(&common.config, &common.overrides())?;
            let dir = cfg.output_dir.clone();
            commands::evaluate(&cfg, &dir, &mut out)?;
            exit_code::OK
        }
        Command::Oracle { common } => {
            let cfg = commands::resolve(&common.config, &common.overrides())?;
            commands::oracle(&cfg, &mut out)?;
            exit_code::OK
        }
    };
    out.flush()?;
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DFP_LOG", "error")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
