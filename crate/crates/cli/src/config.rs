//! Effective run configuration, echoed to disk by every command.
//!
//! The echo file records everything needed to reproduce a run byte for
//! byte: `relkit --from-echo <file>` re-executes it.

use std::fs;
use std::path::{Path, PathBuf};

use relkit_core::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub global: GlobalConfig,
    #[serde(flatten)]
    pub command: CommandConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalConfig {
    /// Master seed; all randomness is derived from it.
    pub seed: u64,
    /// Worker threads for trial/cell parallelism; 0 = one per CPU.
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Ridge regularizer for every model fit by the command.
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "snake_case")]
pub enum CommandConfig {
    Synth(SynthParams),
    Train(TrainParams),
    Eval(EvalParams),
    Xmatrix(XmatrixParams),
    Incremental(IncrementalParams),
    Reliability(ReliabilityParams),
    Filter(FilterParams),
    Datasheet(DatasheetParams),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Synth(_) => "synth",
            CommandConfig::Train(_) => "train",
            CommandConfig::Eval(_) => "eval",
            CommandConfig::Xmatrix(_) => "xmatrix",
            CommandConfig::Incremental(_) => "incremental",
            CommandConfig::Reliability(_) => "reliability",
            CommandConfig::Filter(_) => "filter",
            CommandConfig::Datasheet(_) => "datasheet",
        }
    }
}

/// Frame selection shared by the dataset-consuming commands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Selection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub days: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_k: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthParams {
    pub name: String,
    pub num_classes: usize,
    pub num_categories: usize,
    pub dim: usize,
    pub frames_per_session: usize,
    pub num_days: u32,
    pub class_separation: f64,
    pub within_category_shrink: f64,
    pub noise_sigma: f64,
    pub temporal_rho: f64,
    pub day_drift_sigma: f64,
    pub encoding: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    pub manifest: PathBuf,
    pub selection: Selection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    pub checkpoint: PathBuf,
    pub manifest: PathBuf,
    pub selection: Selection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XmatrixParams {
    pub manifest: PathBuf,
    /// Condition axis: "days" or "variant".
    pub by: String,
    pub selection: Selection,
    /// Per-class training budget per row; derived when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementalParams {
    pub manifest: PathBuf,
    pub train_days: Vec<u32>,
    pub test_days: Vec<u32>,
    pub step: usize,
    pub selection: Selection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReliabilityParams {
    pub manifest: PathBuf,
    pub t_min: usize,
    /// Resolved to T−2 when absent.
    pub t_max: Option<usize>,
    pub trials: usize,
    /// Confidence levels in percent.
    pub levels: Vec<f64>,
    pub selection: Selection,
    /// Majority-vote window applied to each trial's test stream; 1 = none.
    pub filter_window: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterParams {
    pub manifest: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    pub windows: Vec<usize>,
    pub frame_period: f64,
    pub selection: Selection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasheetParams {
    pub manifest: PathBuf,
    pub t_min: usize,
    /// Resolved to T−2 when absent.
    pub t_max: Option<usize>,
    pub trials: usize,
    /// Confidence levels in percent.
    pub levels: Vec<f64>,
    pub target_acc: f64,
    pub selection: Selection,
    pub filter_window: usize,
}

impl RunConfig {
    pub fn echo_path(&self) -> PathBuf {
        self.global
            .out_dir
            .join(format!("{}_config.json", self.command.name()))
    }

    /// Write the echo file (pretty JSON, trailing newline).
    pub fn write_echo(&self) -> Result<()> {
        fs::create_dir_all(&self.global.out_dir)
            .map_err(|e| Error::io(&self.global.out_dir, e))?;
        let path = self.echo_path();
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::invalid_data(format!("config serialization failed: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::invalid_data(format!("{} is not a run config: {e}", path.display()))
        })
    }
}
