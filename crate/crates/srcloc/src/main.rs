use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use srcloc::commands::{self, ReportOptions};
use srcloc::config::{Overrides, RunConfig};
use srcloc::Result;
use srcloc_core::metrics::{motp, AverageMode, MotpMode, TrackReport};

#[derive(Parser)]
#[command(name = "srcloc", version, about = "Microphone-array speaker localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Analysis window length in milliseconds.
    #[arg(long)]
    window_ms: Option<u32>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Single-threaded, bit-reproducible execution.
    #[arg(long)]
    deterministic: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        RunConfig::resolve(
            self.config.as_deref(),
            &Overrides {
                seed: self.seed,
                window_ms: self.window_ms,
                out: self.out.clone(),
                deterministic: self.deterministic,
            },
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Euclidean,
    Squared,
}

#[derive(Clone, Copy, ValueEnum)]
enum Average {
    Pooled,
    Arithmetic,
}

#[derive(Subcommand)]
enum Command {
    /// Generate semi-synthetic training windows into a dataset cache.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain a network on a dataset cache or on fresh simulated epochs.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Adapt a pretrained checkpoint to recorded sequences.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Sequence manifests to train on.
        #[arg(long, num_args = 1.., required = true)]
        sequences: Vec<PathBuf>,
        /// Ids of sequences held out for testing.
        #[arg(long, num_args = 1..)]
        test_sequences: Vec<String>,
    },
    /// Train a fresh network on recorded sequences only.
    TrainScratch {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        sequences: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        test_sequences: Vec<String>,
    },
    /// Localize every speaking frame with a trained network.
    EvalCnn {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        sequences: Vec<PathBuf>,
        /// Method name written into the reports.
        #[arg(long, default_value = "CNN")]
        method: String,
    },
    /// Localize every speaking frame with SRP-PHAT.
    EvalSrp {
        #[command(flatten)]
        common: Common,
        #[arg(long, num_args = 1.., required = true)]
        sequences: Vec<PathBuf>,
    },
    /// Build a result table from track reports.
    Report {
        /// Directories holding track report CSVs.
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// Method the relative improvement is measured against.
        #[arg(long, default_value = "SRP")]
        reference: String,
        #[arg(long, value_enum, default_value = "euclidean")]
        mode: Mode,
        #[arg(long, value_enum, default_value = "pooled")]
        average: Average,
        /// Add the published SRP and GMBF columns of this table.
        #[arg(long)]
        published_table: Option<u32>,
        /// Keep frames that some methods did not estimate.
        #[arg(long)]
        all_frames: bool,
    },
    /// Normalize a raw annotation file to the ground-truth format.
    ConvertAnnotations {
        input: PathBuf,
        #[arg(long)]
        mapping: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the full experiment matrix on a directory of sequence manifests.
    Reproduce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sequences_dir: PathBuf,
        /// Window lengths to evaluate; defaults to the configured one.
        #[arg(long, num_args = 1..)]
        windows: Vec<u32>,
    },
}

fn print_track(r: &TrackReport) {
    match motp(r, MotpMode::Euclidean) {
        Ok(m) => println!("{} {} {m:.4} m over {} frames", r.sequence, r.method, r.frames().len()),
        Err(_) => println!("{} {} no frames", r.sequence, r.method),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let o = commands::simulate(&common.resolve()?)?;
            println!("{} records -> {}", o.records, o.dataset.display());
        }
        Command::Train { common, dataset } => {
            let o = commands::train(&common.resolve()?, dataset.as_deref())?;
            if let Some(r) = o.history.last() {
                println!("epoch {} train loss {:.6}", r.epoch + 1, r.train_loss);
            }
            println!("checkpoint -> {}", o.checkpoint.display());
        }
        Command::Finetune { common, checkpoint, sequences, test_sequences } => {
            let o = commands::finetune(&common.resolve()?, &checkpoint, &sequences, &test_sequences)?;
            println!("checkpoint -> {}", o.checkpoint.display());
        }
        Command::TrainScratch { common, sequences, test_sequences } => {
            let o = commands::train_scratch(&common.resolve()?, &sequences, &test_sequences)?;
            println!("checkpoint -> {}", o.checkpoint.display());
        }
        Command::EvalCnn { common, checkpoint, sequences, method } => {
            for r in commands::eval_cnn(&common.resolve()?, &checkpoint, &sequences, &method)? {
                print_track(&r);
            }
        }
        Command::EvalSrp { common, sequences } => {
            for r in commands::eval_srp(&common.resolve()?, &sequences)? {
                print_track(&r);
            }
        }
        Command::Report { reports, out, reference, mode, average, published_table, all_frames } => {
            let opts = ReportOptions {
                reference: Some(reference),
                mode: match mode {
                    Mode::Euclidean => MotpMode::Euclidean,
                    Mode::Squared => MotpMode::Squared,
                },
                average: match average {
                    Average::Pooled => AverageMode::Pooled,
                    Average::Arithmetic => AverageMode::Arithmetic,
                },
                published_table,
                common_frames: !all_frames,
            };
            let (_, table) = commands::report(&reports, &out, &opts)?;
            print!("{table}");
        }
        Command::ConvertAnnotations { input, mapping, output } => {
            let r = commands::convert(&input, mapping.as_deref(), &output)?;
            print!("{}", r.render());
        }
        Command::Reproduce { common, sequences_dir, windows } => {
            let cfg = common.resolve()?;
            let windows = if windows.is_empty() { vec![cfg.window_ms] } else { windows };
            commands::reproduce(&cfg, &sequences_dir, &windows)?;
            println!("tables -> {}", cfg.out.join("tables.txt").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
