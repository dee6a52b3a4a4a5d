use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use distill_core::training::Mode;
use distill_twin::pipeline::{self, TrainOptions};
use distill_twin::{RunConfig, TwinError};

#[derive(Parser)]
#[command(name = "distill-twin", version, about = "Physics-informed digital twin of a binary distillation column")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pinn,
    #[value(alias = "baseline-mlp", alias = "baseline_mlp")]
    Baseline,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the column and write the noisy dataset CSV (plus a noise-free sidecar).
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory [default: paths.out from the config]
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a network and write checkpoint, history and summary.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset CSV [default: paths.data from the config]
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Keep only this leading fraction of the training block.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u32>,
        /// Continue from a checkpoint of the same config and dataset.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Save and stop once this many epochs are complete.
        #[arg(long)]
        stop_after: Option<u32>,
    },
    /// Test-set metrics and physics consistency as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two eval output directories (a is the reference).
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        bins: usize,
    },
    /// Reconstruct tray profiles at the given times (s).
    Profiles {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long = "time", required = true, num_args = 1..)]
        times: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Permutation feature importance on the test set.
    Importance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn pick(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf, TwinError> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| TwinError::Config(format!("no {what} given on the command line or in [paths]")))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializes"));
}

fn run(cli: Cli) -> Result<(), TwinError> {
    match cli.command {
        Command::Generate { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = pick(out, &cfg.paths.out, "output directory")?;
            let (path, data) = pipeline::generate(&cfg, &out)?;
            println!("wrote {} records to {}", data.noisy.len(), path.display());
        }
        Command::Train {
            config,
            data,
            out,
            mode,
            train_fraction,
            seed,
            epochs,
            resume,
            stop_after,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(m) = mode {
                cfg.training.mode = match m {
                    ModeArg::Pinn => Mode::Pinn,
                    ModeArg::Baseline => Mode::BaselineMlp,
                };
            }
            if let Some(f) = train_fraction {
                cfg.training.train_fraction = f;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(e) = epochs {
                cfg.training.epochs = e;
            }
            cfg.validate()?;
            let data = pick(data, &cfg.paths.data, "dataset")?;
            let out = pick(out, &cfg.paths.out, "output directory")?;
            let ck = pipeline::train(&cfg, &data, &out, &TrainOptions { resume, stop_after })?;
            println!(
                "trained {} epochs, best epoch {} (validation score {:.6e}); checkpoint in {}",
                ck.state.next_epoch,
                ck.state.best_epoch,
                ck.state.best_score,
                out.display()
            );
        }
        Command::Eval { checkpoint, data, out } => print_json(&pipeline::eval(&checkpoint, &data, &out)?),
        Command::Compare { a, b, out, bins } => {
            if bins == 0 {
                return Err(TwinError::Config("--bins must be positive".into()));
            }
            print_json(&pipeline::compare(&a, &b, &out, bins)?.comparison)
        }
        Command::Profiles { checkpoint, data, times, out } => {
            let p = pipeline::profiles(&checkpoint, &data, &times, &out)?;
            println!("wrote {} profiles to {}", p.len(), Path::new(&out).join("profiles.csv").display());
        }
        Command::Importance { checkpoint, data, out } => {
            let imp = pipeline::importance(&checkpoint, &data, &out)?;
            for (rank, i) in imp.iter().enumerate() {
                println!(
                    "{:2}. {:32} {:+.3e} ± {:.1e}",
                    rank + 1,
                    distill_twin::csvio::feature_name(i.feature),
                    i.score,
                    i.std_err
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
