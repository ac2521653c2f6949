use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::mean_std;
use super::HarnessError;
use crate::corpus::Scenario;
use crate::issuegraph::InputMode;
use crate::model::{ModelKind, Task};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Wall-clock seconds per pipeline stage of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub graph_build: f64,
    pub embedding: f64,
    pub training: f64,
    pub prediction: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.graph_build + self.embedding + self.training + self.prediction
    }
}

/// Score of one (unit, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub unit: String,
    pub seed: u64,
    pub mae: f64,
    pub accuracy: Option<f64>,
    pub test_issues: usize,
    pub train_issues: usize,
    /// Epoch and MAE of the best Valid checkpoint, when a Valid split exists.
    pub best_valid: Option<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub unit: String,
    pub runs: usize,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub accuracy_mean: Option<f64>,
    pub accuracy_std: Option<f64>,
    /// Issues with no usable text, left out of the graph.
    pub dropped_issues: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTimings {
    pub unit: String,
    pub seed: u64,
    #[serde(flatten)]
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub input_mode: InputMode,
    pub model: ModelKind,
    pub task: Task,
    pub seeds: Vec<u64>,
    /// Every configuration key and its effective value.
    pub config: BTreeMap<String, String>,
    pub dataset_fingerprint: String,
    pub runs: Vec<RunResult>,
    pub units: Vec<UnitSummary>,
    /// Mean of the per-unit means.
    pub average_mae: f64,
    pub average_accuracy: Option<f64>,
    /// Wall-clock data, the only part of a report that varies between
    /// identical runs.
    pub timings: Vec<RunTimings>,
}

/// Groups runs by unit (first-seen order) and summarizes each group.
pub fn summarize(runs: &[RunResult], dropped: &BTreeMap<String, usize>) -> Vec<UnitSummary> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.unit.as_str()) {
            order.push(&r.unit);
        }
    }
    order
        .into_iter()
        .map(|u| {
            let group: Vec<&RunResult> = runs.iter().filter(|r| r.unit == u).collect();
            let maes: Vec<f64> = group.iter().map(|r| r.mae).collect();
            let accs: Option<Vec<f64>> = group.iter().map(|r| r.accuracy).collect();
            let (mae_mean, mae_std) = mean_std(&maes);
            let acc = accs.filter(|a| !a.is_empty()).map(|a| mean_std(&a));
            UnitSummary {
                unit: u.to_string(),
                runs: group.len(),
                mae_mean,
                mae_std,
                accuracy_mean: acc.map(|a| a.0),
                accuracy_std: acc.map(|a| a.1),
                dropped_issues: dropped.get(u).copied().unwrap_or(0),
            }
        })
        .collect()
}

impl EvalReport {
    /// Recomputes `units` and the averages from `runs`.
    pub fn aggregate(&mut self, dropped: &BTreeMap<String, usize>) {
        self.units = summarize(&self.runs, dropped);
        let means: Vec<f64> = self.units.iter().map(|u| u.mae_mean).collect();
        self.average_mae = mean_std(&means).0;
        let accs: Option<Vec<f64>> = self.units.iter().map(|u| u.accuracy_mean).collect();
        self.average_accuracy = accs.filter(|a| !a.is_empty()).map(|a| mean_std(&a).0);
    }

    /// The report with wall-clock data removed.
    pub fn without_timings(&self) -> EvalReport {
        EvalReport {
            timings: Vec::new(),
            ..self.clone()
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.timings.iter().map(|t| t.timings.total()).sum()
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// One row per run: `unit,seed,mae,accuracy,test_issues`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["unit", "seed", "mae", "accuracy", "test_issues"])
            .map_err(csv_io)?;
        for r in &self.runs {
            out.write_record([
                r.unit.clone(),
                r.seed.to_string(),
                format!("{:?}", r.mae),
                r.accuracy.map(|a| format!("{a:?}")).unwrap_or_default(),
                r.test_issues.to_string(),
            ])
            .map_err(csv_io)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e))
}
