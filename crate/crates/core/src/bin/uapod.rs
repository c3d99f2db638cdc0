use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uapod::cli::{parse_config, run_pipeline};
use uapod::Error;

#[derive(Parser)]
#[command(
    name = "uapod",
    version,
    about = "Uncertainty-aware reduced bases for fluid flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment described by a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// 1-based time step for the diagnostic maps.
        #[arg(long)]
        fig1_t: Option<usize>,
    },
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Run {
            config,
            output_dir,
            seed,
            fig1_t,
        } => {
            let text = std::fs::read_to_string(&config).map_err(|source| Error::Io {
                path: config.clone(),
                source,
            })?;
            let mut cfg = parse_config(&text)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if fig1_t.is_some() {
                cfg.fig1_t = fig1_t;
            }
            let exp = run_pipeline(&cfg)?;
            println!("wrote {}", cfg.output_dir.display());
            if let Some(rho) = exp.fig1.spearman {
                println!("fig1 t={} spearman={rho:.4}", exp.fig1.t);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
