// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, TARGETS};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "lsvi", version, about = "Least-squares variational inference runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config and write trace.csv, final.params and meta
    Run {
        config: PathBuf,
        /// Output directory, overriding `out` in the config
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config without running it
    Validate { config: PathBuf },
    /// List the built-in targets and their fields
    Targets,
}

/// Worker count from `LSVI_THREADS`; results do not depend on it.
fn thread_count() -> Result<usize, String> {
    match std::env::var("LSVI_THREADS") {
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("LSVI_THREADS must be a positive integer, got `{v}`")),
        },
    }
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    RunConfig::load(path).map_err(|errors| {
        for e in &errors.0 {
            eprintln!("config error: {e}");
        }
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Targets => {
            for (name, fields) in TARGETS {
                println!("{name}\n    {fields}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(_) => ExitCode::SUCCESS,
            Err(code) => code,
        },
        Command::Run { config, out } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let threads = match thread_count() {
                Ok(n) => n,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
                eprintln!("error: thread pool: {e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
            let out = out.unwrap_or_else(|| cfg.out.clone());
            match run::run_to_dir(&cfg, &out, threads) {
                Ok(()) => {
                    log::info!("wrote {}", out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_RUNTIME)
                }
            }
        }
    }
}
