//! `gsbp`: runs bridge, flow and audit experiments described by TOML configs.
//!
//! Exit status: 0 on success, 2 when a config is invalid, 3 when a run fails
//! numerically, 1 on I/O errors. With several configs the largest code wins.
//! Set `GSBP_LOG` (e.g. `GSBP_LOG=debug`) for diagnostics on stderr.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod examples;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub use error::CliError;
use run::Experiment;

#[derive(Parser)]
#[command(name = "gsbp", version, about = "Generalized Schrödinger bridges as Hamiltonian flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments; independent configs execute in parallel.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List the bundled example configs.
    ListExamples {
        /// Also write them (and the graph files they use) into this directory.
        #[arg(long, value_name = "DIR")]
        write: Option<PathBuf>,
    },
}

fn report(path: &std::path::Path, err: &CliError) -> u8 {
    eprintln!("error: {}: {err}", path.display());
    err.exit_code()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GSBP_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { configs } => {
            let outcomes: Vec<_> = std::thread::scope(|scope| {
                let handles: Vec<_> = configs
                    .iter()
                    .map(|path| scope.spawn(move || Experiment::load(path).and_then(|e| e.run())))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("experiment thread panicked")).collect()
            });
            let mut code = 0;
            for (path, outcome) in configs.iter().zip(outcomes) {
                match outcome {
                    Ok(summary) => println!(
                        "{}: wrote {} to {}",
                        path.display(),
                        summary.artifacts.join(", "),
                        summary.output.display()
                    ),
                    Err(e) => code = code.max(report(path, &e)),
                }
            }
            code
        }
        Command::Validate { config } => match Experiment::load(&config) {
            Ok(exp) => {
                println!("{}: ok ({:?})", config.display(), exp.config.kind);
                0
            }
            Err(e) => report(&config, &e),
        },
        Command::ListExamples { write } => {
            for ex in examples::EXAMPLES.iter().filter(|e| e.is_config()) {
                println!("{:<26} {}", ex.file, ex.summary());
            }
            match write {
                Some(dir) => match examples::write_all(&dir) {
                    Ok(()) => 0,
                    Err(e) => report(&dir, &e),
                },
                None => 0,
            }
        }
    };
    ExitCode::from(code)
}
