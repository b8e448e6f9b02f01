//! Command-line entry point. Every run writes a manifest with the resolved
//! configuration and file digests; `--replay` executes a manifest again and
//! checks that the outputs come out byte-identical.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod config;
mod manifest;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{
    EvaluateFileConfig, EvaluateRun, FeaturizeRun, IngestRun, PredictRun, ReportRun, RunConfig, ScreenRun, SynthRun, TrainRun,
};
pub use manifest::{sha256_file, Manifest, MANIFEST_NAME};

use crate::dataset::{read_csv, write_csv, DatasetError};
use crate::evaluation::{self, CiMethod, EvalConfig, EvalError, EvaluationReport, Protocol};
use crate::features::{self, FeatureError, FeatureMatrix};
use crate::ingestion::{self, ApiClient, ApiConfig, IngestError};
use crate::models::{self, ModelError, ModelKind, ModelSpec, TrainedModel, TrainingCurve};
use crate::synthgen::{self, GenConfig, SynthError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            ModelError::Io(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Model(m) => m.into(),
            EvalError::BadK(_) | EvalError::BadNRef => CliError::Usage(e.to_string()),
            EvalError::Json(_) => CliError::Internal(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "champ-outcome", version, about = "Pre-match win prediction from player-champion experience")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    /// Where to write the run manifest [default: run-manifest.json beside the main output]
    #[arg(long, global = true, value_name = "PATH")]
    pub manifest: Option<PathBuf>,
    /// Re-execute a run manifest and verify its outputs byte for byte
    #[arg(long, value_name = "MANIFEST", exclusive = true)]
    pub replay: Option<PathBuf>,
    /// More log output (repeat for debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pull unique matches from the API (or a fixture directory) into a dataset CSV
    Ingest(IngestArgs),
    /// Generate a synthetic dataset CSV
    Synth(SynthArgs),
    /// Turn a dataset CSV into the 44-column feature CSV
    Featurize(FeaturizeArgs),
    /// Correlation screening of the raw per-player features
    Screen(ScreenArgs),
    /// Fit one model on a feature CSV
    Train(TrainArgs),
    /// Cross-validate models and write report.md / report.json
    Evaluate(EvaluateArgs),
    /// Score a feature CSV with a trained model
    Predict(PredictArgs),
    /// Merge report.json files into one table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Read JSON fixtures from this directory instead of the network
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    /// API settings as JSON; the key comes from the environment only
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub base_url: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Generator settings as JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of matches (overrides the config file)
    #[arg(long)]
    pub n: Option<usize>,
    /// Skill weight (overrides the config file)
    #[arg(long)]
    pub skill_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Column description sidecar [default: <out>.columns.json]
    #[arg(long)]
    pub descriptions: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_json: PathBuf,
    #[arg(long)]
    pub out_md: Option<PathBuf>,
    #[arg(long, default_value_t = features::DEFAULT_ALPHA)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Hyperparameter overrides as JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training curve CSV for the network [default: <out>.curves.csv]
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Models to evaluate, comma separated or repeated [default: all five]
    #[arg(long, value_enum, value_delimiter = ',')]
    pub model: Vec<ModelKind>,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub ci: Option<CiMethod>,
    /// Rows behind the binomial interval [default: all input rows]
    #[arg(long)]
    pub n_ref: Option<usize>,
    /// Cross-validate on every row instead of holding out a test partition
    #[arg(long, conflicts_with = "test_fraction")]
    pub cv_all: bool,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Evaluation settings and per-model overrides as JSON
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// report.json files, rows kept in the given order
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

/// Parse `argv`, run, and map the outcome to an exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_default_env().try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(path) = cli.replay {
        return replay(&path);
    }
    let command = cli.command.ok_or_else(|| CliError::Usage("a subcommand is required".into()))?;
    let run = resolve(command)?;
    let manifest_path = cli.manifest.unwrap_or_else(|| default_manifest_path(&run));
    execute(&run, Some(&manifest_path)).map(|_| ())
}

fn seed_or_draw(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Turn parsed arguments into a fully resolved run: defaults filled in,
/// config files merged, and seeds drawn when omitted.
pub fn resolve(command: Command) -> Result<RunConfig, CliError> {
    Ok(match command {
        Command::Ingest(a) => {
            let mut api: ApiConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => ApiConfig::default(),
            };
            if let Some(url) = a.base_url {
                api.base_url = url;
            }
            if a.n == 0 {
                return Err(CliError::Usage("--n must be at least 1".into()));
            }
            RunConfig::Ingest(IngestRun { out: a.out, n: a.n, seed: seed_or_draw(a.seed), fixtures: a.fixtures, api })
        }
        Command::Synth(a) => {
            let mut generator: GenConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => GenConfig::default(),
            };
            if let Some(n) = a.n {
                generator.n_matches = n;
            }
            if let Some(w) = a.skill_weight {
                generator.skill_weight = w;
            }
            generator.validate()?;
            RunConfig::Synth(SynthRun { out: a.out, seed: seed_or_draw(a.seed), generator })
        }
        Command::Featurize(a) => {
            let descriptions = a.descriptions.unwrap_or_else(|| with_suffix(&a.out, ".columns.json"));
            RunConfig::Featurize(FeaturizeRun { input: a.input, out: a.out, descriptions })
        }
        Command::Screen(a) => {
            if !(a.alpha > 0.0 && a.alpha < 1.0) {
                return Err(CliError::Usage(format!("--alpha must lie in (0,1), got {}", a.alpha)));
            }
            let out_md = a.out_md.unwrap_or_else(|| a.out_json.with_extension("md"));
            RunConfig::Screen(ScreenRun { input: a.input, out_json: a.out_json, out_md, alpha: a.alpha })
        }
        Command::Train(a) => {
            let overrides = match &a.config {
                Some(p) => read_json(p)?,
                None => serde_json::json!({}),
            };
            let spec = ModelSpec::from_json(a.model, overrides).map_err(|e| CliError::Usage(e.to_string()))?;
            spec.validate()?;
            let curves = (a.model == ModelKind::Dnn).then(|| a.curves.unwrap_or_else(|| with_suffix(&a.out, ".curves.csv")));
            RunConfig::Train(TrainRun { features: a.features, out: a.out, seed: seed_or_draw(a.seed), spec, curves })
        }
        Command::Evaluate(a) => {
            let file: EvaluateFileConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => EvaluateFileConfig::default(),
            };
            let mut eval = EvalConfig::default();
            file.apply(&mut eval);
            if let Some(k) = a.k {
                eval.k = k;
            }
            if let Some(ci) = a.ci {
                eval.ci = ci;
            }
            if a.n_ref.is_some() {
                eval.n_ref = a.n_ref;
            }
            if a.cv_all {
                eval.protocol = Protocol::CvAll;
            }
            if let Some(f) = a.test_fraction {
                if !(f > 0.0 && f < 1.0) {
                    return Err(CliError::Usage(format!("--test-fraction must lie in (0,1), got {f}")));
                }
                eval.protocol = Protocol::Holdout { test_fraction: f };
            }
            if eval.k < 2 {
                return Err(CliError::Usage(format!("--k must be at least 2, got {}", eval.k)));
            }
            if eval.n_ref == Some(0) {
                return Err(CliError::Usage("--n-ref must be positive".into()));
            }
            let mut kinds = if a.model.is_empty() { ModelKind::ALL.to_vec() } else { a.model };
            kinds.dedup();
            let models = kinds
                .into_iter()
                .map(|k| {
                    let over = file.models.get(&k).cloned().unwrap_or_else(|| serde_json::json!({}));
                    let spec = ModelSpec::from_json(k, over).map_err(|e| CliError::Usage(e.to_string()))?;
                    spec.validate()?;
                    Ok(spec)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            RunConfig::Evaluate(EvaluateRun { features: a.features, out_dir: a.out_dir, seed: seed_or_draw(a.seed), eval, models })
        }
        Command::Predict(a) => RunConfig::Predict(PredictRun { features: a.features, model: a.model, out: a.out }),
        Command::Report(a) => RunConfig::Report(ReportRun { inputs: a.inputs, out_md: a.out, out_json: a.out_json }),
    })
}

pub fn default_manifest_path(run: &RunConfig) -> PathBuf {
    let main_output: &Path = match run {
        RunConfig::Ingest(r) => &r.out,
        RunConfig::Synth(r) => &r.out,
        RunConfig::Featurize(r) => &r.out,
        RunConfig::Screen(r) => &r.out_json,
        RunConfig::Train(r) => &r.out,
        RunConfig::Evaluate(r) => return r.out_dir.join(MANIFEST_NAME),
        RunConfig::Predict(r) => &r.out,
        RunConfig::Report(r) => &r.out_md,
    };
    main_output.parent().map_or_else(|| PathBuf::from(MANIFEST_NAME), |p| p.join(MANIFEST_NAME))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn read_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    let (_, fm) = features::read_feature_csv(open(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(fm)
}

fn labelled_features(path: &Path) -> Result<FeatureMatrix, CliError> {
    let fm = read_features(path)?;
    if fm.y.len() != fm.x.nrows() {
        return Err(CliError::Data(format!("{}: training input needs an outcome column", path.display())));
    }
    Ok(fm)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

/// Execute a resolved run and, given a path, write its manifest there.
pub fn execute(run: &RunConfig, manifest_path: Option<&Path>) -> Result<Manifest, CliError> {
    let (inputs, outputs, deferred) = execute_inner(run)?;
    let manifest = Manifest::new(run.clone(), &inputs, &outputs)?;
    if let Some(path) = manifest_path {
        manifest.write(path)?;
        log::info!("wrote {}", path.display());
    }
    match deferred {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

type Files = (Vec<PathBuf>, Vec<PathBuf>, Option<CliError>);

fn execute_inner(run: &RunConfig) -> Result<Files, CliError> {
    match run {
        RunConfig::Ingest(r) => {
            let api = r.api.clone().with_env_key();
            let client = match &r.fixtures {
                Some(dir) => ApiClient::fixtures(api, dir)?,
                None => ApiClient::http(api)?,
            };
            let got = ingestion::ingest_random_matches(&client, r.n, r.seed)?;
            let mut buf = Vec::new();
            write_csv(&got.dataset, &mut buf)?;
            write_file(&r.out, &buf)?;
            for (id, why) in &got.skipped {
                log::info!("skipped {id}: {why}");
            }
            let inputs = r.fixtures.iter().map(|d| d.join("candidates.json")).collect();
            Ok((inputs, vec![r.out.clone()], got.shortfall.map(CliError::from)))
        }
        RunConfig::Synth(r) => {
            let d = synthgen::generate_dataset(&r.generator, r.seed)?;
            let mut buf = Vec::new();
            write_csv(&d, &mut buf)?;
            write_file(&r.out, &buf)?;
            Ok((vec![], vec![r.out.clone()], None))
        }
        RunConfig::Featurize(r) => {
            let d = read_csv(open(&r.input)?).map_err(|e| CliError::Data(format!("{}: {e}", r.input.display())))?;
            let fm = features::featurize(&d.matches)?;
            let mut buf = Vec::new();
            features::write_feature_csv(&fm, &mut buf)?;
            write_file(&r.out, &buf)?;
            write_file(&r.descriptions, &json_bytes(&features::column_descriptions())?)?;
            Ok((vec![r.input.clone()], vec![r.out.clone(), r.descriptions.clone()], None))
        }
        RunConfig::Screen(r) => {
            let d = read_csv(open(&r.input)?).map_err(|e| CliError::Data(format!("{}: {e}", r.input.display())))?;
            let report = features::screen_features(&d, r.alpha)?;
            write_file(&r.out_json, &json_bytes(&report)?)?;
            write_file(&r.out_md, report.to_markdown().as_bytes())?;
            Ok((vec![r.input.clone()], vec![r.out_json.clone(), r.out_md.clone()], None))
        }
        RunConfig::Train(r) => {
            let fm = labelled_features(&r.features)?;
            let model = models::fit(&r.spec, &fm.x, &fm.y, r.seed)?;
            write_file(&r.out, &serde_json::to_vec(&model).map_err(|e| CliError::Internal(e.to_string()))?)?;
            let mut outputs = vec![r.out.clone()];
            if let (Some(path), Some(curve)) = (&r.curves, &model.meta.curve) {
                write_file(path, curve.to_csv().as_bytes())?;
                outputs.push(path.clone());
            }
            Ok((vec![r.features.clone()], outputs, None))
        }
        RunConfig::Evaluate(r) => {
            let fm = labelled_features(&r.features)?;
            if r.models.is_empty() {
                return Err(CliError::Usage("no models to evaluate".into()));
            }
            let mut reports = Vec::new();
            let mut outputs = Vec::new();
            for spec in &r.models {
                let run = evaluation::evaluate(spec, &fm.x, &fm.y, &r.eval, r.seed)?;
                for w in run.folds.iter().flat_map(|f| &f.warnings).take(1) {
                    log::warn!("{}: {w}", spec.kind());
                }
                if spec.kind() == ModelKind::Dnn {
                    let main = run.final_curve.clone().or_else(|| run.folds.first().and_then(|f| f.curve.clone()));
                    if let Some(curve) = main {
                        let path = r.out_dir.join("curves.csv");
                        write_file(&path, curve.to_csv().as_bytes())?;
                        outputs.push(path);
                    }
                    let path = r.out_dir.join("curves-folds.csv");
                    write_file(&path, fold_curves_csv(&run.folds).as_bytes())?;
                    outputs.push(path);
                }
                reports.push(run.report);
            }
            let md = r.out_dir.join("report.md");
            let json = r.out_dir.join("report.json");
            write_file(&md, evaluation::emit_markdown(&reports)?.as_bytes())?;
            write_file(&json, evaluation::emit_json(&reports)?.as_bytes())?;
            outputs.splice(0..0, [md, json]);
            Ok((vec![r.features.clone()], outputs, None))
        }
        RunConfig::Predict(r) => {
            let model = TrainedModel::load(&r.model).map_err(|e| CliError::Data(format!("{}: {e}", r.model.display())))?;
            let fm = read_features(&r.features)?;
            let probs = model.predict_proba_batch(&fm.x)?;
            let mut out = String::from("row,probability,prediction\n");
            for (i, p) in probs.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", i, p, u8::from(*p >= 0.5)));
            }
            write_file(&r.out, out.as_bytes())?;
            Ok((vec![r.model.clone(), r.features.clone()], vec![r.out.clone()], None))
        }
        RunConfig::Report(r) => {
            let mut reports: Vec<EvaluationReport> = Vec::new();
            for p in &r.inputs {
                let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
                reports.extend(evaluation::parse_json(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?);
            }
            write_file(&r.out_md, evaluation::emit_markdown(&reports)?.as_bytes())?;
            let mut outputs = vec![r.out_md.clone()];
            if let Some(j) = &r.out_json {
                write_file(j, evaluation::emit_json(&reports)?.as_bytes())?;
                outputs.push(j.clone());
            }
            Ok((r.inputs.clone(), outputs, None))
        }
    }
}

fn fold_curves_csv(folds: &[evaluation::FoldResult]) -> String {
    let mut out = String::from("fold,epoch,train_loss,train_acc,val_loss,val_acc\n");
    for f in folds {
        if let Some(c) = &f.curve {
            for line in TrainingCurve::to_csv(c).lines().skip(1) {
                out.push_str(&format!("{},{line}\n", f.fold));
            }
        }
    }
    out
}

/// Check recorded input digests, re-run, then compare every output digest.
pub fn replay(path: &Path) -> Result<(), CliError> {
    let recorded = Manifest::read(path)?;
    for (file, digest) in &recorded.inputs {
        let now = sha256_file(Path::new(file))?;
        if &now != digest {
            return Err(CliError::Data(format!("input {file} changed since the recorded run")));
        }
    }
    let fresh = execute(&recorded.run, None)?;
    let mut diverged = Vec::new();
    for (file, digest) in &recorded.outputs {
        if fresh.outputs.get(file) != Some(digest) {
            diverged.push(file.clone());
        }
    }
    if !diverged.is_empty() {
        return Err(CliError::Internal(format!("replay produced different bytes for: {}", diverged.join(", "))));
    }
    eprintln!("replayed {} run; {} outputs identical", recorded.run.name(), recorded.outputs.len());
    Ok(())
}
