use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use vcod_core::pseudolabel::ConsistencyParams;
use vcod_harness::{
    report, run_eval, run_pseudo, run_toydemo, scan_dataset, EvalMode, HarnessError, ReportFormat, RunConfig,
    ToyDemoConfig,
};

#[derive(Parser)]
#[command(
    name = "vcod",
    version,
    about = "Video camouflaged object detection dataset and evaluation tools"
)]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and print its manifest summary as JSON.
    Scan {
        #[arg(long)]
        root: PathBuf,
    },
    /// Write flow-warped pseudo masks next to the ground truth.
    Pseudo {
        #[arg(long)]
        root: PathBuf,
        #[command(flatten)]
        mask: MaskArgs,
    },
    /// Score predictions and print a report.
    Eval {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Annotated)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        /// Also write metrics.csv and metrics.md into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        mask: MaskArgs,
    },
    /// Overfit the toy network on synthetic moving squares.
    Toydemo {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long, default_value_t = 4)]
        samples: usize,
        /// Train with the correlation pyramid frozen.
        #[arg(long)]
        freeze_motion: bool,
        /// Write loss_trace.csv and summary.md into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MaskArgs {
    /// Binarisation threshold in (0, 1).
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Forward-backward consistency: relative tolerance.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Forward-backward consistency: absolute tolerance in squared pixels.
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Annotated,
    Pseudo,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Markdown,
}

fn config(threads: Option<usize>, mask: &MaskArgs, mode: Mode, format: Format) -> Result<RunConfig, HarnessError> {
    let c = RunConfig {
        mode: match mode {
            Mode::Annotated => EvalMode::AnnotatedOnly,
            Mode::Pseudo => EvalMode::AllFramesWithPseudo,
        },
        threshold: mask.threshold,
        consistency: ConsistencyParams {
            alpha: mask.alpha,
            beta: mask.beta,
        },
        format: match format {
            Format::Csv => ReportFormat::Csv,
            Format::Markdown => ReportFormat::Markdown,
        },
        threads,
    };
    c.validate()?;
    Ok(c)
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

fn run(cli: Cli) -> Result<String, HarnessError> {
    match cli.command {
        Command::Scan { root } => {
            let m = scan_dataset(&root)?;
            let sequences: Vec<_> = m
                .sequences
                .iter()
                .map(|s| {
                    json!({
                        "name": s.name,
                        "split": s.split,
                        "frames": s.frames.len(),
                        "annotated": s.gt.len(),
                        "stride": s.stride,
                        "flow": s.flow_dir.is_some(),
                    })
                })
                .collect();
            let out = json!({ "counts": m.counts(), "sequences": sequences, "warnings": m.warnings });
            Ok(serde_json::to_string_pretty(&out).expect("serialisable") + "\n")
        }
        Command::Pseudo { root, mask } => {
            let c = config(cli.threads, &mask, Mode::Annotated, Format::Markdown)?;
            let m = scan_dataset(&root)?;
            let summary = run_pseudo(&m, c.pseudo_params())?;
            Ok(serde_json::to_string_pretty(&summary).expect("serialisable") + "\n")
        }
        Command::Eval {
            root,
            predictions,
            mode,
            format,
            out,
            mask,
        } => {
            let c = config(cli.threads, &mask, mode, format)?;
            let m = scan_dataset(&root)?;
            let outcome = run_eval(&m, &predictions, &c)?;
            let rows = report::rows(&outcome);
            let (csv, md) = (report::csv(&rows), report::markdown(&rows));
            if let Some(dir) = out {
                write(&dir.join("metrics.csv"), &csv)?;
                write(&dir.join("metrics.md"), &md)?;
            }
            Ok(match c.format {
                ReportFormat::Csv => csv,
                ReportFormat::Markdown => md,
            })
        }
        Command::Toydemo {
            seed,
            steps,
            lr,
            samples,
            freeze_motion,
            out,
        } => {
            let cfg = ToyDemoConfig {
                seed,
                steps,
                lr,
                samples,
                freeze_motion,
            };
            let result = run_toydemo(&cfg)?;
            let summary = result.summary_markdown();
            if let Some(dir) = out {
                write(&dir.join("loss_trace.csv"), &result.trace_csv())?;
                write(&dir.join("summary.md"), &summary)?;
            }
            Ok(summary)
        }
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    match threads {
        Some(0) => Err(HarnessError::Config("thread count must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| HarnessError::Config(e.to_string())),
        None => Ok(f()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, HarnessError> {
    Ok(f())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_threads(cli.threads, || run(cli)).and_then(|r| r) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::FAILURE
        }
    }
}
