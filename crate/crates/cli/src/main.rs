//! relkit: train incremental least-squares recognizers on feature-vector
//! streams and measure how reliably they recognize.
//!
//! Every command echoes its effective configuration to
//! `<out-dir>/<command>_config.json`; `relkit --from-echo <file>` re-runs
//! that configuration and reproduces the outputs byte for byte.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relkit_core::error::{Error, Result};

use config::{
    CommandConfig, DatasheetParams, EvalParams, FilterParams, GlobalConfig, IncrementalParams,
    ReliabilityParams, RunConfig, Selection, SynthParams, TrainParams, XmatrixParams,
};

/// Exit codes: 0 success, 2 invalid argument, 3 invalid data, 4 I/O error.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::EmptySelection(_) => 2,
        Error::InvalidData(_) => 3,
        Error::Io { .. } => 4,
    }
}

#[derive(Parser)]
#[command(
    name = "relkit",
    version,
    about = "Recognition-reliability experiments over feature-vector datasets",
    after_help = "Exit codes: 0 ok, 2 invalid argument, 3 invalid data, 4 I/O error.\n\
                  File formats are specified in FORMATS.md."
)]
struct Cli {
    /// Re-run a previous invocation from its config echo file.
    #[arg(long, value_name = "FILE")]
    from_echo: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Master seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads for trials and matrix cells (0 = one per CPU).
    /// Outputs do not depend on this.
    #[arg(long, default_value_t = 0)]
    workers: usize,

    /// Directory for reports and the config echo file.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,

    /// Ridge regularizer for every model fit.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl GlobalArgs {
    fn into_config(self) -> GlobalConfig {
        GlobalConfig {
            seed: self.seed,
            workers: self.workers,
            out_dir: self.out_dir,
            lambda: self.lambda,
        }
    }
}

#[derive(Args, Debug, Default)]
struct SelectionArgs {
    /// Keep only these acquisition days, e.g. --days 1,2.
    #[arg(long, value_delimiter = ',')]
    days: Option<Vec<u32>>,

    /// Restrict to one split (train|test) instead of the command default.
    #[arg(long)]
    split: Option<String>,

    /// Keep only this variant tag.
    #[arg(long)]
    variant: Option<String>,

    /// Keep only these class ids; survivors are re-indexed densely in
    /// ascending order (pass the same list to train and eval).
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<usize>>,

    /// Keep only the first K frames per class.
    #[arg(long, value_name = "K")]
    first_k: Option<usize>,
}

impl SelectionArgs {
    fn into_selection(self) -> Selection {
        Selection {
            days: self.days,
            split: self.split,
            variant: self.variant,
            classes: self.classes,
            first_k: self.first_k,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multi-day acquisition dataset.
    Synth {
        #[command(flatten)]
        global: GlobalArgs,
        /// Dataset name recorded in the manifest.
        #[arg(long, default_value = "synth")]
        name: String,
        #[arg(long, default_value_t = 28)]
        num_classes: usize,
        /// Must divide the class count.
        #[arg(long, default_value_t = 7)]
        num_categories: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        /// Frames per (object, day, split) session.
        #[arg(long, default_value_t = 220)]
        frames_per_session: usize,
        #[arg(long, default_value_t = 4)]
        num_days: u32,
        /// Scale of category anchors and class offsets.
        #[arg(long, default_value_t = 1.0)]
        class_separation: f64,
        /// In (0,1]; smaller packs a category's classes closer together.
        #[arg(long, default_value_t = 0.5)]
        shrink: f64,
        /// Per-dimension frame noise; 0 puts frames exactly on the means.
        #[arg(long, default_value_t = 4.0)]
        noise_sigma: f64,
        /// AR(1) correlation of consecutive frames, in [0,1).
        #[arg(long, default_value_t = 0.8)]
        rho: f64,
        /// Std of the per-(class, day) mean shift.
        #[arg(long, default_value_t = 0.4)]
        day_drift: f64,
        /// Feature file encoding: csv|bin.
        #[arg(long, default_value = "bin")]
        encoding: String,
    },

    /// Fit a classifier on a dataset selection and save the checkpoint.
    Train {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Evaluate a checkpoint on a dataset selection (JSON to stdout).
    Eval {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Train-condition x test-condition accuracy matrix with a pooled row.
    Xmatrix {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Condition axis: days|variant.
        #[arg(long, default_value = "days")]
        by: String,
        /// Per-class training budget per row (a multiple of the condition
        /// count); largest feasible budget when omitted.
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Learning curve: rank-one updates through sources, periodic evaluation.
    Incremental {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Training days, consumed in the given order.
        #[arg(long, value_delimiter = ',', required = true)]
        train_days: Vec<u32>,
        /// Days whose test split forms the held-out evaluation set.
        #[arg(long, value_delimiter = ',', required = true)]
        test_days: Vec<u32>,
        /// Examples per class between checkpoints.
        #[arg(long, default_value_t = 10)]
        step: usize,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Accuracy distributions over random class subsets and level curves.
    Reliability {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, default_value_t = 2)]
        t_min: usize,
        /// Defaults to T−2.
        #[arg(long)]
        t_max: Option<usize>,
        /// Subset trials per t.
        #[arg(long, default_value_t = 400)]
        trials: usize,
        /// Confidence levels in percent.
        #[arg(long, value_delimiter = ',', default_value = "98,95,90,80,70,50")]
        levels: Vec<f64>,
        /// Majority-vote window applied to each trial's test stream (1 = off).
        #[arg(long, default_value_t = 1)]
        filter_window: usize,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Temporal-filtering sweep: accuracy per window size.
    Filter {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Evaluate this checkpoint instead of training on the train split.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Window sizes: comma list of items, each N or A-B, e.g. 1,3,5-9.
        #[arg(long, default_value = "1-50")]
        windows: String,
        /// Seconds between consecutive frames.
        #[arg(long, default_value_t = 0.09)]
        frame_period: f64,
        #[command(flatten)]
        selection: SelectionArgs,
    },

    /// Maximum recognizable objects at a target accuracy per confidence level.
    Datasheet {
        #[command(flatten)]
        global: GlobalArgs,
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        #[arg(long, default_value_t = 2)]
        t_min: usize,
        /// Defaults to T−2.
        #[arg(long)]
        t_max: Option<usize>,
        #[arg(long, default_value_t = 400)]
        trials: usize,
        /// Confidence levels in percent.
        #[arg(long, value_delimiter = ',', default_value = "98,90,80,70,50")]
        levels: Vec<f64>,
        /// Target accuracy the datasheet guarantees.
        #[arg(long, default_value_t = 0.98)]
        target_acc: f64,
        /// Majority-vote window applied to each trial's test stream (1 = off).
        #[arg(long, default_value_t = 1)]
        filter_window: usize,
        #[command(flatten)]
        selection: SelectionArgs,
    },
}

/// Expand "1,3,5-9" into window sizes.
fn parse_windows(spec: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in spec.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        match item.split_once('-') {
            Some((a, b)) => {
                let lo: usize = a
                    .parse()
                    .map_err(|_| Error::invalid_argument(format!("bad window range '{item}'")))?;
                let hi: usize = b
                    .parse()
                    .map_err(|_| Error::invalid_argument(format!("bad window range '{item}'")))?;
                if lo < 1 || hi < lo {
                    return Err(Error::invalid_argument(format!(
                        "bad window range '{item}'"
                    )));
                }
                out.extend(lo..=hi);
            }
            None => {
                let w: usize = item
                    .parse()
                    .map_err(|_| Error::invalid_argument(format!("bad window size '{item}'")))?;
                out.push(w);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::invalid_argument("no window sizes given"));
    }
    Ok(out)
}

fn build_config(command: Command) -> Result<RunConfig> {
    let (global, command) = match command {
        Command::Synth {
            global,
            name,
            num_classes,
            num_categories,
            dim,
            frames_per_session,
            num_days,
            class_separation,
            shrink,
            noise_sigma,
            rho,
            day_drift,
            encoding,
        } => (
            global,
            CommandConfig::Synth(SynthParams {
                name,
                num_classes,
                num_categories,
                dim,
                frames_per_session,
                num_days,
                class_separation,
                within_category_shrink: shrink,
                noise_sigma,
                temporal_rho: rho,
                day_drift_sigma: day_drift,
                encoding,
            }),
        ),
        Command::Train {
            global,
            manifest,
            selection,
        } => (
            global,
            CommandConfig::Train(TrainParams {
                manifest,
                selection: selection.into_selection(),
            }),
        ),
        Command::Eval {
            global,
            checkpoint,
            manifest,
            selection,
        } => (
            global,
            CommandConfig::Eval(EvalParams {
                checkpoint,
                manifest,
                selection: selection.into_selection(),
            }),
        ),
        Command::Xmatrix {
            global,
            manifest,
            by,
            budget,
            selection,
        } => (
            global,
            CommandConfig::Xmatrix(XmatrixParams {
                manifest,
                by,
                selection: selection.into_selection(),
                budget,
            }),
        ),
        Command::Incremental {
            global,
            manifest,
            train_days,
            test_days,
            step,
            selection,
        } => (
            global,
            CommandConfig::Incremental(IncrementalParams {
                manifest,
                train_days,
                test_days,
                step,
                selection: selection.into_selection(),
            }),
        ),
        Command::Reliability {
            global,
            manifest,
            t_min,
            t_max,
            trials,
            levels,
            filter_window,
            selection,
        } => (
            global,
            CommandConfig::Reliability(ReliabilityParams {
                manifest,
                t_min,
                t_max,
                trials,
                levels,
                selection: selection.into_selection(),
                filter_window,
            }),
        ),
        Command::Filter {
            global,
            manifest,
            checkpoint,
            windows,
            frame_period,
            selection,
        } => (
            global,
            CommandConfig::Filter(FilterParams {
                manifest,
                checkpoint,
                windows: parse_windows(&windows)?,
                frame_period,
                selection: selection.into_selection(),
            }),
        ),
        Command::Datasheet {
            global,
            manifest,
            t_min,
            t_max,
            trials,
            levels,
            target_acc,
            filter_window,
            selection,
        } => (
            global,
            CommandConfig::Datasheet(DatasheetParams {
                manifest,
                t_min,
                t_max,
                trials,
                levels,
                target_acc,
                selection: selection.into_selection(),
                filter_window,
            }),
        ),
    };
    Ok(RunConfig {
        global: global.into_config(),
        command,
    })
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let config = match (cli.from_echo, cli.command) {
        (Some(path), None) => RunConfig::load(&path)?,
        (None, Some(command)) => build_config(command)?,
        _ => {
            return Err(Error::invalid_argument(
                "give a subcommand or --from-echo <file> (see --help)",
            ))
        }
    };
    if config.global.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.global.workers)
            .build()
            .map_err(|e| Error::invalid_argument(format!("worker pool: {e}")))?;
        pool.install(|| commands::execute(config))
    } else {
        commands::execute(config)
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
