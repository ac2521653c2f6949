use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{EmbeddingCorpus, RunConfig};
use super::metrics::{accuracy, mae};
use super::report::{EvalReport, RunResult, RunTimings, Timings, REPORT_SCHEMA_VERSION};
use super::HarnessError;
use crate::corpus::{split_cross, split_within_project, IssueSet, Scenario, Split, SplitMasks};
use crate::embedding::{init_node_embeddings, train_cbow, EmbeddingModel};
use crate::error::Result;
use crate::issuegraph::{graph_from_issues, HeteroGraph, InputMode, NodeType};
use crate::model::{predict, train, ClassMap, ModelKind, Task, TrainTrace, TrainedModel};
use crate::par;

/// Source and target of the cross-project, same-repository pairs.
pub const CROSS_WITHIN_REPO_PAIRS: [(&str, &str); 8] = [
    ("AS", "AP"),
    ("AS", "TI"),
    ("AP", "TI"),
    ("ME", "UG"),
    ("MS", "MU"),
    ("MU", "MS"),
    ("TI", "AS"),
    ("UG", "ME"),
];

/// Source and target of the cross-repository pairs.
pub const CROSS_REPO_PAIRS: [(&str, &str); 8] = [
    ("AS", "MU"),
    ("AS", "MS"),
    ("CV", "UG"),
    ("MS", "TI"),
    ("MU", "TI"),
    ("TD", "AS"),
    ("TD", "AP"),
    ("TE", "ME"),
];

/// What one row of a report is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unit {
    Project(String),
    Pair { source: String, target: String },
}

impl Unit {
    pub fn pair(source: &str, target: &str) -> Self {
        Unit::Pair {
            source: source.to_string(),
            target: target.to_string(),
        }
    }

    /// `CV` for a project, `CV:UG` for a pair.
    pub fn label(&self) -> String {
        match self {
            Unit::Project(p) => p.clone(),
            Unit::Pair { source, target } => format!("{source}:{target}"),
        }
    }

    /// Parses `CV` or `CV:UG` (also `CV-UG`).
    pub fn parse(s: &str) -> Self {
        match s.split_once([':', '-']) {
            Some((a, b)) => Unit::pair(a.trim(), b.trim()),
            None => Unit::Project(s.trim().to_string()),
        }
    }

    fn projects(&self) -> Vec<&str> {
        match self {
            Unit::Project(p) => vec![p],
            Unit::Pair { source, target } => vec![source, target],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: Scenario,
    pub units: Vec<Unit>,
    pub input_mode: InputMode,
    pub model_kind: ModelKind,
    pub task: Task,
    pub seeds: Vec<u64>,
}

impl ScenarioSpec {
    /// The standard units of `kind`: every project in `data` for
    /// within-project runs, the fixed pair lists otherwise. Seeds are
    /// `0..cfg.repeats`; mode, model and task come from `cfg`.
    pub fn standard(kind: Scenario, data: &IssueSet, cfg: &RunConfig) -> Self {
        let units = match kind {
            Scenario::WithinProject => data
                .projects()
                .map(|p| Unit::Project(p.to_string()))
                .collect(),
            Scenario::CrossWithinRepo => CROSS_WITHIN_REPO_PAIRS
                .iter()
                .map(|(s, t)| Unit::pair(s, t))
                .collect(),
            Scenario::CrossRepo => CROSS_REPO_PAIRS
                .iter()
                .map(|(s, t)| Unit::pair(s, t))
                .collect(),
        };
        Self::with_units(kind, units, cfg)
    }

    pub fn with_units(kind: Scenario, units: Vec<Unit>, cfg: &RunConfig) -> Self {
        Self {
            kind,
            units,
            input_mode: cfg.input_mode,
            model_kind: cfg.model_kind,
            task: cfg.model.task,
            seeds: (0..cfg.repeats as u64).collect(),
        }
    }

    /// `cfg` with this spec's mode, model and task applied.
    pub fn effective_config(&self, cfg: &RunConfig) -> RunConfig {
        let mut c = cfg.clone();
        c.input_mode = self.input_mode;
        c.model_kind = self.model_kind;
        c.model.task = self.task;
        c
    }
}

/// The seed-independent part of a run: splits and the merged graph.
#[derive(Debug, Clone)]
pub struct PreparedUnit {
    pub unit: Unit,
    pub masks: SplitMasks,
    pub graph: HeteroGraph,
    pub dropped: Vec<String>,
    pub graph_seconds: f64,
}

impl PreparedUnit {
    /// Document rows of labeled Test issues.
    pub fn test_rows(&self) -> Vec<usize> {
        labeled(&self.graph, Split::Test)
    }

    /// Token sequences of every Sentence and CodePart whose issue is in
    /// `corpus`.
    pub fn embedding_sentences(&self, corpus: EmbeddingCorpus) -> Vec<Vec<String>> {
        let keep = |key: &str| {
            let issue = key.rsplit_once('/').map_or(key, |(i, _)| i);
            match corpus {
                EmbeddingCorpus::All => true,
                EmbeddingCorpus::Train => self.masks.get(issue) == Some(Split::Train),
            }
        };
        [NodeType::Sentence, NodeType::CodePart]
            .into_iter()
            .flat_map(|t| {
                let table = self.graph.table(t);
                table
                    .keys
                    .iter()
                    .zip(&table.tokens)
                    .filter(|(k, _)| keep(k))
                    .map(|(_, toks)| toks.clone())
            })
            .collect()
    }
}

fn labeled(graph: &HeteroGraph, split: Split) -> Vec<usize> {
    graph
        .documents_in(split)
        .into_iter()
        .filter(|&r| graph.labels[r].is_finite())
        .collect()
}

/// Splits the unit's issues and builds their merged graph.
pub fn prepare_unit(
    data: &IssueSet,
    kind: Scenario,
    unit: &Unit,
    cfg: &RunConfig,
) -> Result<PreparedUnit> {
    for p in unit.projects() {
        if !data.has_project(p) {
            return Err(HarnessError::MissingProject(p.to_string()).into());
        }
    }
    let start = Instant::now();
    let masks = match unit {
        Unit::Project(p) => split_within_project(data, p, cfg.ratios)?,
        Unit::Pair { source, target } => {
            split_cross(data, source, target, kind, cfg.cross_valid_tail)?
        }
    };
    let issues: Vec<_> = data
        .issues()
        .iter()
        .filter(|i| masks.get(&i.issue_key).is_some())
        .collect();
    let norm = crate::textnorm::TextNormalizer::new(cfg.textnorm.clone())?;
    let built = graph_from_issues(&issues, &norm, cfg.input_mode, &masks)?;
    let prepared = PreparedUnit {
        unit: unit.clone(),
        masks,
        graph: built.graph,
        dropped: built.dropped,
        graph_seconds: start.elapsed().as_secs_f64(),
    };
    if prepared.test_rows().is_empty() {
        return Err(HarnessError::NoTestIssues(unit.label()).into());
    }
    Ok(prepared)
}

/// One Test estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub issue_key: String,
    pub estimate: f64,
    pub actual: f64,
}

/// CSV with columns `issue_key,estimate,actual`.
pub fn write_predictions<W: Write>(w: W, preds: &[Prediction]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["issue_key", "estimate", "actual"])?;
    for p in preds {
        let actual = if p.actual.is_finite() {
            format!("{:?}", p.actual)
        } else {
            String::new()
        };
        out.write_record([p.issue_key.clone(), format!("{:?}", p.estimate), actual])?;
    }
    out.flush()
}

/// Everything one (unit, seed) run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub result: RunResult,
    pub timings: Timings,
    pub predictions: Vec<Prediction>,
    pub trace: TrainTrace,
    pub model: TrainedModel,
    pub embedding: EmbeddingModel,
}

/// MAE of the estimates and, for classification, the accuracy of the
/// estimated class against the class nearest each actual value.
pub fn score_run(
    estimates: &[f64],
    actual: &[f64],
    classes: Option<&ClassMap>,
) -> Result<(f64, Option<f64>)> {
    let m = mae(estimates, actual)?;
    let acc = match classes {
        Some(c) => {
            let p: Vec<usize> = estimates.iter().map(|&v| c.nearest(v)).collect();
            let a: Vec<usize> = actual.iter().map(|&v| c.nearest(v)).collect();
            Some(accuracy(&p, &a)?)
        }
        None => None,
    };
    Ok((m, acc))
}

/// Trains embeddings and the model with `seed` and scores the Test issues.
pub fn run_unit(prep: &PreparedUnit, cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    let graph = &prep.graph;

    let start = Instant::now();
    let mut ecfg = cfg.embedding.clone();
    ecfg.seed = seed;
    let embedding = train_cbow(&prep.embedding_sentences(cfg.embedding_corpus), &ecfg)?;
    let features = init_node_embeddings(graph, &embedding, cfg.model.input_dim)?;
    let embedding_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let mut mcfg = cfg.model.clone();
    mcfg.seed = seed;
    let outcome = train(cfg.model_kind, graph, &features, &mcfg)?;
    let training_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let rows = prep.test_rows();
    let estimates = predict(&outcome.model, graph, &features, &rows)?;
    let prediction_seconds = start.elapsed().as_secs_f64();

    let actual: Vec<f64> = rows.iter().map(|&r| graph.labels[r]).collect();
    let (m, acc) = score_run(&estimates, &actual, outcome.model.class_map.as_ref())?;
    let predictions = rows
        .iter()
        .zip(&estimates)
        .map(|(&r, &estimate)| Prediction {
            issue_key: graph.issue_keys[r].clone(),
            estimate,
            actual: graph.labels[r],
        })
        .collect();
    Ok(RunOutput {
        result: RunResult {
            unit: prep.unit.label(),
            seed,
            mae: m,
            accuracy: acc,
            test_issues: rows.len(),
            train_issues: outcome.trace.loss_rows,
            best_valid: outcome.best_valid,
        },
        timings: Timings {
            graph_build: prep.graph_seconds,
            embedding: embedding_seconds,
            training: training_seconds,
            prediction: prediction_seconds,
        },
        predictions,
        trace: outcome.trace,
        model: outcome.model,
        embedding,
    })
}

/// Runs every (unit, seed) combination and aggregates the scores.
///
/// Graphs are built once per unit; the runs themselves are independent and
/// execute in parallel. Results are ordered by unit, then seed.
pub fn run_scenario(spec: &ScenarioSpec, data: &IssueSet, cfg: &RunConfig) -> Result<EvalReport> {
    run_scenario_with(spec, data, cfg, |_| Ok(()))
}

/// [`run_scenario`], handing each run's full output to `on_run` (e.g. to
/// write prediction files) before it is dropped.
pub fn run_scenario_with<F>(
    spec: &ScenarioSpec,
    data: &IssueSet,
    cfg: &RunConfig,
    on_run: F,
) -> Result<EvalReport>
where
    F: Fn(&RunOutput) -> Result<()> + Sync,
{
    let cfg = spec.effective_config(cfg);
    let prepared = spec
        .units
        .iter()
        .map(|u| prepare_unit(data, spec.kind, u, &cfg))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|u| spec.seeds.iter().map(move |&s| (u, s)))
        .collect();
    let outputs = par::map(&jobs, |&(u, seed)| {
        let prep = &prepared[u];
        log::info!("{} seed {seed}", prep.unit.label());
        run_unit(prep, &cfg, seed)
            .and_then(|o| on_run(&o).map(|()| (o.result, o.timings)))
            .map_err(|e| HarnessError::Run {
                unit: prep.unit.label(),
                seed,
                source: Box::new(e),
            })
    });
    let mut runs = Vec::with_capacity(outputs.len());
    let mut timings = Vec::with_capacity(outputs.len());
    for o in outputs {
        let (r, t) = o?;
        timings.push(RunTimings {
            unit: r.unit.clone(),
            seed: r.seed,
            timings: t,
        });
        runs.push(r);
    }
    let dropped: BTreeMap<String, usize> = prepared
        .iter()
        .map(|p| (p.unit.label(), p.dropped.len()))
        .collect();
    let mut report = EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: spec.kind,
        input_mode: spec.input_mode,
        model: spec.model_kind,
        task: spec.task,
        seeds: spec.seeds.clone(),
        config: cfg
            .to_kv()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        dataset_fingerprint: data.fingerprint(),
        runs,
        units: Vec::new(),
        average_mae: f64::NAN,
        average_accuracy: None,
        timings,
    };
    report.aggregate(&dropped);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_labels_parse_back() {
        assert_eq!(Unit::parse("CV:UG"), Unit::pair("CV", "UG"));
        assert_eq!(Unit::parse("TD-AS"), Unit::pair("TD", "AS"));
        assert_eq!(Unit::parse("ME"), Unit::Project("ME".into()));
        assert_eq!(Unit::pair("CV", "UG").label(), "CV:UG");
    }

    #[test]
    fn classification_scores_against_nearest_class() {
        let classes = ClassMap::from_values([1.0, 3.0, 8.0]).unwrap();
        let (m, acc) = score_run(&[1.0, 8.0, 3.0], &[1.0, 5.0, 13.0], Some(&classes)).unwrap();
        assert!((m - (0.0 + 3.0 + 10.0) / 3.0).abs() < 1e-12);
        // 5 is nearest to 3 (tie-free), 13 to 8.
        assert!((acc.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}
