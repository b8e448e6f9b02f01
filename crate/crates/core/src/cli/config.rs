use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::evaluation::{CiMethod, EvalConfig, Protocol};
use crate::features::DEFAULT_ALPHA;
use crate::ingestion::ApiConfig;
use crate::models::{ModelKind, ModelSpec};
use crate::synthgen::GenConfig;

/// Fully resolved settings of one run. Replaying a manifest executes this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum RunConfig {
    Ingest(IngestRun),
    Synth(SynthRun),
    Featurize(FeaturizeRun),
    Screen(ScreenRun),
    Train(TrainRun),
    Evaluate(EvaluateRun),
    Predict(PredictRun),
    Report(ReportRun),
}

impl RunConfig {
    pub fn name(&self) -> &'static str {
        match self {
            RunConfig::Ingest(_) => "ingest",
            RunConfig::Synth(_) => "synth",
            RunConfig::Featurize(_) => "featurize",
            RunConfig::Screen(_) => "screen",
            RunConfig::Train(_) => "train",
            RunConfig::Evaluate(_) => "evaluate",
            RunConfig::Predict(_) => "predict",
            RunConfig::Report(_) => "report",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestRun {
    pub out: PathBuf,
    pub n: usize,
    pub seed: u64,
    pub fixtures: Option<PathBuf>,
    pub api: ApiConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthRun {
    pub out: PathBuf,
    pub seed: u64,
    pub generator: GenConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturizeRun {
    pub input: PathBuf,
    pub out: PathBuf,
    pub descriptions: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenRun {
    pub input: PathBuf,
    pub out_json: PathBuf,
    pub out_md: PathBuf,
    pub alpha: f64,
}

impl Default for ScreenRun {
    fn default() -> Self {
        Self { input: PathBuf::new(), out_json: PathBuf::new(), out_md: PathBuf::new(), alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainRun {
    pub features: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub spec: ModelSpec,
    /// Per-epoch curve CSV, written for the network only.
    pub curves: Option<PathBuf>,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            features: PathBuf::new(),
            out: PathBuf::new(),
            seed: 0,
            spec: ModelSpec::default_for(ModelKind::Gboost),
            curves: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateRun {
    pub features: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub eval: EvalConfig,
    pub models: Vec<ModelSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictRun {
    pub features: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportRun {
    pub inputs: Vec<PathBuf>,
    pub out_md: PathBuf,
    pub out_json: Option<PathBuf>,
}

/// `--config` file accepted by `evaluate`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateFileConfig {
    pub k: Option<usize>,
    pub protocol: Option<Protocol>,
    pub ci: Option<CiMethod>,
    pub n_ref: Option<usize>,
    /// Hyperparameter overrides keyed by model name.
    pub models: BTreeMap<ModelKind, serde_json::Value>,
}

impl EvaluateFileConfig {
    pub fn apply(&self, base: &mut EvalConfig) {
        if let Some(k) = self.k {
            base.k = k;
        }
        if let Some(p) = self.protocol {
            base.protocol = p;
        }
        if let Some(ci) = self.ci {
            base.ci = ci;
        }
        if self.n_ref.is_some() {
            base.n_ref = self.n_ref;
        }
    }
}
