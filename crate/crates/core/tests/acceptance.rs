//! Acceptance checks. Prints one `PASS`/`FAIL`/`SKIP` line per criterion and
//! exits nonzero if any check fails.
//!
//! Dataset checks (4-7) run when `SPGRAPH_DATASET_DIR` points at the
//! directory of per-project CSV exports and are skipped otherwise.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use spgraph::corpus::{
    corpus_stats, load_csv, load_dataset_dir, ColumnMap, IssueSet, Scenario, Split, SplitMasks,
};
use spgraph::harness::{
    prepare_unit, run_scenario, run_unit, write_predictions, RunConfig, ScenarioSpec, Unit,
};
use spgraph::issuegraph::{
    build_issue_graph, merge_hetero, HeteroGraph, InputMode, NodeType, RelationType,
};
use spgraph::model::{ModelKind, Task};
use spgraph::textnorm::TextNormalizer;

use common::{hgt_gradcheck, synthetic_simple_corpus, CheckLoss};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::{Fail, Pass, Skip};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn c1_gradient() -> Outcome {
    let start = Instant::now();
    let l1 = hgt_gradcheck(CheckLoss::L1, 1e-4);
    let ce = hgt_gradcheck(CheckLoss::CrossEntropy, 1e-4);
    let secs = start.elapsed().as_secs_f64();
    let (name, worst) = [l1.worst(), ce.worst()]
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let unexercised = l1.unexercised.len() + ce.unexercised.len();
    check(
        worst < 1e-4 && unexercised == 0 && secs < 60.0,
        format!(
            "{} tensors, worst relative error {worst:.2e} ({name}), {unexercised} tensors with zero gradient, {secs:.1}s",
            l1.per_tensor.len()
        ),
    )
}

/// Node keys per type and upward edges as key pairs, in the fixture layout.
fn listing(h: &HeteroGraph) -> Vec<String> {
    let mut out = Vec::new();
    for t in NodeType::ALL {
        out.push(format!("[{}]", t.name()));
        out.extend(h.table(t).keys.iter().cloned());
    }
    for r in RelationType::all().filter(|r| !r.reversed) {
        out.push(format!("[{}]", r.name()));
        let (src, dst) = (h.table(r.src()), h.table(r.dst()));
        out.extend(
            h.relation(r)
                .iter()
                .map(|(s, d)| format!("{} -> {}", src.keys[s], dst.keys[d])),
        );
    }
    out
}

fn read_listing(name: &str) -> Vec<String> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

fn mirrors_hold(h: &HeteroGraph) -> bool {
    RelationType::all().filter(|r| !r.reversed).all(|r| {
        let rev = RelationType {
            reversed: true,
            ..r
        };
        let mut up: Vec<(usize, usize)> = h.relation(r).iter().map(|(s, d)| (d, s)).collect();
        up.sort_unstable();
        up == h.relation(rev).iter().collect::<Vec<_>>()
    })
}

fn graph_of(set: &IssueSet, keys: &[&str]) -> HeteroGraph {
    let norm = TextNormalizer::new(Default::default()).unwrap();
    let issues: Vec<_> = keys.iter().map(|k| set.get(k).unwrap()).collect();
    let graphs: Vec<_> = issues
        .iter()
        .map(|i| {
            let (pt, pd) = norm.issue_parts(&i.title, &i.description);
            build_issue_graph(i, &pt, &pd).unwrap()
        })
        .collect();
    let labels = issues
        .iter()
        .map(|i| (i.issue_key.clone(), i.story_point.unwrap()))
        .collect();
    let masks = SplitMasks {
        assignment: issues
            .iter()
            .map(|i| (i.issue_key.clone(), Split::Train))
            .collect(),
        scenario: Scenario::WithinProject,
        source_project: None,
        target_project: None,
    };
    merge_hetero(&graphs, &labels, &masks).unwrap()
}

fn c2_graph() -> Outcome {
    let set = load_csv(fixture("five_issues.csv"), &ColumnMap::default(), "K", "K").unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for (keys, file) in [
        (
            &["K-1", "K-2", "K-3", "K-4", "K-5"][..],
            "five_issues.graph",
        ),
        (&["K-1", "K-2"][..], "two_issues.graph"),
    ] {
        let h = graph_of(&set, keys);
        let got = listing(&h);
        let want = read_listing(file);
        if got != want {
            ok = false;
            let first = got
                .iter()
                .zip(&want)
                .position(|(a, b)| a != b)
                .unwrap_or(got.len().min(want.len()));
            notes.push(format!(
                "{file}: first difference at line {first}: got {:?}, want {:?}",
                got.get(first),
                want.get(first)
            ));
        } else {
            notes.push(format!("{file}: {} lines match", got.len()));
        }
        if !mirrors_hold(&h) {
            ok = false;
            notes.push(format!("{file}: reverse relations are not mirrors"));
        }
    }
    check(ok, notes.join("; "))
}

/// Default configuration with 300 epochs.
fn synthetic_config(task: Task) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.model.epochs = 300;
    cfg.model.task = task;
    cfg
}

struct SyntheticRun {
    mae: f64,
    baseline: f64,
    seconds: f64,
    predictions: Vec<u8>,
    trace: Vec<u8>,
}

fn synthetic_run(cfg: &RunConfig) -> SyntheticRun {
    let set = synthetic_simple_corpus();
    let start = Instant::now();
    let prep = prepare_unit(
        &set,
        Scenario::WithinProject,
        &Unit::Project("SYN".into()),
        cfg,
    )
    .unwrap();
    let out = run_unit(&prep, cfg, 0).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let train: Vec<f64> = prep
        .graph
        .documents_in(Split::Train)
        .iter()
        .map(|&r| prep.graph.labels[r])
        .collect();
    let mean = train.iter().sum::<f64>() / train.len() as f64;
    let baseline = out
        .predictions
        .iter()
        .map(|p| (p.actual - mean).abs())
        .sum::<f64>()
        / out.predictions.len() as f64;
    let mut predictions = Vec::new();
    write_predictions(&mut predictions, &out.predictions).unwrap();
    let mut trace = Vec::new();
    out.trace.write_csv(&mut trace, false).unwrap();
    SyntheticRun {
        mae: out.result.mae,
        baseline,
        seconds,
        predictions,
        trace,
    }
}

fn c3_learnability(run: &SyntheticRun) -> Outcome {
    check(
        run.mae < 1.0 && run.seconds < 120.0,
        format!(
            "Test MAE {:.3} (train-mean predictor {:.3}), {:.1}s",
            run.mae, run.baseline, run.seconds
        ),
    )
}

fn dataset() -> Option<IssueSet> {
    let dir = std::env::var_os("SPGRAPH_DATASET_DIR")?;
    Some(
        load_dataset_dir(dir, &ColumnMap::default())
            .expect("SPGRAPH_DATASET_DIR is not a readable dataset"),
    )
}

const RAW_VOCAB: [(&str, usize); 16] = [
    ("AS", 26301),
    ("AP", 13424),
    ("BB", 7946),
    ("CV", 7906),
    ("DM", 32617),
    ("DC", 6699),
    ("JI", 4471),
    ("ME", 37242),
    ("MD", 14236),
    ("MU", 9769),
    ("MS", 7101),
    ("XD", 26544),
    ("TD", 13257),
    ("TE", 13394),
    ("TI", 41839),
    ("UG", 5628),
];

fn within(value: f64, target: f64, frac: f64) -> bool {
    (value - target).abs() <= frac * target
}

fn c4_corpus(set: &IssueSet) -> Outcome {
    let norm = TextNormalizer::new(Default::default()).unwrap();
    let raw = corpus_stats(set, false, &norm);
    let normd = corpus_stats(set, true, &norm);
    let code = raw.tag_counts.get("{code}").copied().unwrap_or(0);
    let noformat = raw.tag_counts.get("{noformat}").copied().unwrap_or(0);
    let mut problems = Vec::new();
    if raw.total_issues != 23313 {
        problems.push(format!("{} issues", raw.total_issues));
    }
    if !within(code as f64, 6371.0, 0.05) {
        problems.push(format!("{{code}} in {code} issues"));
    }
    if !within(noformat as f64, 1069.0, 0.05) {
        problems.push(format!("{{noformat}} in {noformat} issues"));
    }
    for (p, vocab) in RAW_VOCAB {
        let (Some(r), Some(n)) = (raw.projects.get(p), normd.projects.get(p)) else {
            problems.push(format!("{p} missing"));
            continue;
        };
        if n.vocab_size >= r.vocab_size || n.avg_appearance <= r.avg_appearance {
            problems.push(format!(
                "{p}: vocab {}->{}, avg app {:.2}->{:.2}",
                r.vocab_size, n.vocab_size, r.avg_appearance, n.avg_appearance
            ));
        }
        if !within(r.vocab_size as f64, vocab as f64, 0.10) {
            problems.push(format!("{p}: raw vocab {} vs {vocab}", r.vocab_size));
        }
    }
    check(
        problems.is_empty(),
        format!(
            "{} issues, {{code}} {code}, {{noformat}} {noformat}; {}",
            raw.total_issues,
            if problems.is_empty() {
                "all projects in range".into()
            } else {
                problems.join(", ")
            }
        ),
    )
}

fn cv_ug(set: &IssueSet, model: ModelKind, mode: InputMode) -> (f64, f64) {
    let cfg = RunConfig {
        model_kind: model,
        input_mode: mode,
        repeats: 3,
        ..Default::default()
    };
    let spec = ScenarioSpec::with_units(Scenario::CrossRepo, vec![Unit::pair("CV", "UG")], &cfg);
    let report = run_scenario(&spec, set, &cfg).unwrap();
    let per_run = report.total_seconds() / report.runs.len() as f64;
    (report.average_mae, per_run)
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    results.push((1, "gradient oracle", c1_gradient()));
    results.push((2, "graph oracle", c2_graph()));

    let first = synthetic_run(&synthetic_config(Task::Regression));
    results.push((3, "synthetic learnability", c3_learnability(&first)));

    match dataset() {
        None => {
            for (n, name) in [
                (4, "corpus statistics"),
                (5, "cross-repo CV:UG"),
                (6, "HGT vs GCN on CV:UG"),
                (7, "title/description ablation"),
            ] {
                results.push((n, name, Skip("SPGRAPH_DATASET_DIR not set".into())));
            }
        }
        Some(set) => {
            results.push((4, "corpus statistics", c4_corpus(&set)));
            let (full, secs) = cv_ug(&set, ModelKind::Hgt, InputMode::Full);
            results.push((
                5,
                "cross-repo CV:UG",
                check(
                    full <= 1.5 && secs <= 600.0,
                    format!("mean MAE {full:.3}, {secs:.1}s per run"),
                ),
            ));
            let (gcn, _) = cv_ug(&set, ModelKind::Gcn, InputMode::Full);
            results.push((
                6,
                "HGT vs GCN on CV:UG",
                check(full <= gcn + 0.1, format!("HGT {full:.3}, GCN {gcn:.3}")),
            ));
            let (title, _) = cv_ug(&set, ModelKind::Hgt, InputMode::TitleOnly);
            let (desc, _) = cv_ug(&set, ModelKind::Hgt, InputMode::DescriptionOnly);
            results.push((
                7,
                "title/description ablation",
                check(
                    (title - full).abs() <= 0.5 && (desc - full).abs() <= 0.5,
                    format!("full {full:.3}, title-only {title:.3}, description-only {desc:.3}"),
                ),
            ));
        }
    }

    let cfg = synthetic_config(Task::Classification);
    let spec = ScenarioSpec {
        seeds: vec![0],
        ..ScenarioSpec::with_units(
            Scenario::WithinProject,
            vec![Unit::Project("SYN".into())],
            &cfg,
        )
    };
    let report = run_scenario(&spec, &synthetic_simple_corpus(), &cfg).unwrap();
    let json: serde_json::Value = serde_json::to_value(&report).unwrap();
    let run = &json["runs"][0];
    let shape_ok = run["accuracy"].is_number()
        && run["mae"].is_number()
        && json["average_accuracy"].is_number();
    let acc = report.average_accuracy.unwrap_or(0.0);
    results.push((
        8,
        "classification mode",
        check(
            acc > 0.8 && shape_ok,
            format!(
                "Test accuracy {acc:.3}, MAE {:.3}, report fields present: {shape_ok}",
                report.average_mae
            ),
        ),
    ));

    let second = synthetic_run(&synthetic_config(Task::Regression));
    let same_preds = first.predictions == second.predictions;
    let same_trace = first.trace == second.trace;
    results.push((
        9,
        "determinism",
        check(
            same_preds && same_trace,
            format!(
                "predictions identical: {same_preds} ({} bytes), loss traces identical: {same_trace} ({} bytes)",
                first.predictions.len(),
                first.trace.len()
            ),
        ),
    ));

    let mut failed = BTreeMap::new();
    for (n, name, outcome) in &results {
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed.insert(*n, *name);
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("{tag} criterion {n} ({name}): {detail}");
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {:?}", failed.keys().collect::<Vec<_>>());
        std::process::exit(1);
    }
}
