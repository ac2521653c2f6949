//! Experiment protocols, metrics, configuration and reports.

mod bundle;
mod config;
mod metrics;
mod report;
mod scenario;

use thiserror::Error;

pub use bundle::{load_bundle, read_bundle, save_bundle, write_bundle, Bundle};
pub use config::{EmbeddingCorpus, RunConfig, ENV_PREFIX};
pub use metrics::{accuracy, mae, mean_std};
pub use report::{
    summarize, EvalReport, RunResult, RunTimings, Timings, UnitSummary, REPORT_SCHEMA_VERSION,
};
pub use scenario::{
    prepare_unit, run_scenario, run_scenario_with, run_unit, score_run, write_predictions,
    Prediction, PreparedUnit, RunOutput, ScenarioSpec, Unit, CROSS_REPO_PAIRS,
    CROSS_WITHIN_REPO_PAIRS,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("project {0:?} not in the data")]
    MissingProject(String),
    #[error("{unit} seed {seed}: {source}")]
    Run {
        unit: String,
        seed: u64,
        #[source]
        source: Box<crate::Error>,
    },
    #[error("no Test issues with labels for {0}")]
    NoTestIssues(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
