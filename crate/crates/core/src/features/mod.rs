//! Feature engineering: per-team moment summaries, the 44-column match
//! vector, correlation screening and per-column standardization.

mod screening;
mod standardize;
mod stats;
mod vector;

use thiserror::Error;

pub use screening::{point_biserial, screen_features, RawFeature, ScreenedFeature, ScreeningReport, DEFAULT_ALPHA};
pub use standardize::Standardizer;
pub use stats::{summary_stats, StatSummary, SUMMARY_COLUMNS};
pub use vector::{
    build_feature_vector, column_descriptions, column_names, featurize, read_feature_csv, write_feature_csv,
    FeatureMatrix, FeatureVector, AGGREGATE_OFFSET, N_FEATURES, TEAM_A_MEAN_WIN_RATE, TEAM_B_MEAN_WIN_RATE,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid match {id}: {violations}")]
    InvalidMatch { id: String, violations: String },
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),
    #[error("length mismatch: {0} values vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} matches, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("bad header: {0}")]
    Header(String),
}
