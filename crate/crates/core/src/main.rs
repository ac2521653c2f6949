use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spgraph::corpus::{
    corpus_stats, load_csv, load_dataset_dir, ColumnMap, IssueSet, Scenario, Split, SplitMasks,
};
use spgraph::embedding::{init_node_embeddings, save_model as save_embedding, train_cbow};
use spgraph::harness::{
    load_bundle, prepare_unit, run_scenario_with, save_bundle, write_predictions, Bundle,
    HarnessError, RunConfig, ScenarioSpec, Unit,
};
use spgraph::issuegraph::{graph_from_issues, save_graph, write_json_dump, InputMode};
use spgraph::model::{predict, ModelKind, Task};
use spgraph::textnorm::TextNormalizer;
use spgraph::Result;

#[derive(Parser)]
#[command(
    name = "spgraph",
    version,
    about = "Story-point estimation with heterogeneous graph transformers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics (raw and normalized) as JSON.
    Analyze {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Build the merged graph of one project or pair.
    BuildGraph {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        unit: UnitArgs,
        /// Also write a JSON dump of the graph.
        #[arg(long)]
        json: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the subword embedding model of one project or pair.
    TrainEmbed {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        unit: UnitArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run an evaluation scenario and write its report.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        /// Comma-separated `SRC:DST` pairs; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        pairs: Vec<String>,
        /// Comma-separated projects for within-project runs; defaults to all.
        #[arg(long, value_delimiter = ',')]
        projects: Vec<String>,
        /// Runs per unit, with seeds `seed..seed+repeats`.
        #[arg(long)]
        repeats: Option<usize>,
        /// Also write the per-run scores as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Directory for per-run prediction and loss-trace CSVs.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        /// With `--artifacts`, also save a prediction bundle per run.
        #[arg(long, requires = "artifacts")]
        save_models: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate story points of new issues with a saved bundle.
    Predict {
        /// Bundle written by `run --save-models`.
        #[arg(long = "model")]
        checkpoint: PathBuf,
        /// CSV of issues (`issuekey,title,description`).
        #[arg(long)]
        issues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Dataset directory of per-project CSVs, or a single CSV.
    #[arg(long)]
    input: PathBuf,
    /// Project name for a single CSV (default: the upper-cased file stem).
    #[arg(long)]
    project: Option<String>,
}

#[derive(Args)]
struct UnitArgs {
    #[arg(long, value_enum, default_value = "within-project")]
    scenario: ScenarioArg,
    /// `CV` for a project or `CV:UG` for a pair.
    #[arg(long)]
    unit: String,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "desc_only")]
    title_only: bool,
    #[arg(long)]
    desc_only: bool,
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    WithinProject,
    CrossWithinRepo,
    CrossRepo,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::WithinProject => Scenario::WithinProject,
            ScenarioArg::CrossWithinRepo => Scenario::CrossWithinRepo,
            ScenarioArg::CrossRepo => Scenario::CrossRepo,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Regression,
    Classification,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Hgt,
    Gcn,
}

impl Common {
    /// Defaults, then the config file, then `SPGRAPH_*`, then flags.
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        cfg.apply_env(std::env::vars())?;
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        if self.title_only {
            cfg.input_mode = InputMode::TitleOnly;
        }
        if self.desc_only {
            cfg.input_mode = InputMode::DescriptionOnly;
        }
        if let Some(t) = self.task {
            cfg.model.task = match t {
                TaskArg::Regression => Task::Regression,
                TaskArg::Classification => Task::Classification,
            };
        }
        if let Some(m) = self.model {
            cfg.model_kind = match m {
                ModelArg::Hgt => ModelKind::Hgt,
                ModelArg::Gcn => ModelKind::Gcn,
            };
        }
        Ok(cfg)
    }
}

fn load_input(args: &InputArgs, columns: &ColumnMap) -> Result<IssueSet> {
    if args.input.is_dir() {
        return Ok(load_dataset_dir(&args.input, columns)?);
    }
    let project = args.project.clone().unwrap_or_else(|| {
        args.input
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .to_uppercase()
    });
    Ok(load_csv(&args.input, columns, &project, &project)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(HarnessError::from)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct AnalyzeOutput {
    dataset_fingerprint: String,
    raw: spgraph::corpus::CorpusStats,
    normalized: spgraph::corpus::CorpusStats,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze { input, common } => {
            let cfg = common.config()?;
            let set = load_input(&input, &ColumnMap::default())?;
            let norm = TextNormalizer::new(cfg.textnorm)?;
            let out = AnalyzeOutput {
                dataset_fingerprint: set.fingerprint(),
                raw: corpus_stats(&set, false, &norm),
                normalized: corpus_stats(&set, true, &norm),
            };
            write_json(&common.out, &out)
        }
        Command::BuildGraph {
            input,
            unit,
            json,
            common,
        } => {
            let cfg = common.config()?;
            let set = load_input(&input, &ColumnMap::default())?;
            let prep = prepare_unit(&set, unit.scenario.into(), &Unit::parse(&unit.unit), &cfg)?;
            for key in &prep.dropped {
                log::warn!("{key}: no text after normalization, left out");
            }
            save_graph(&common.out, &prep.graph)?;
            if let Some(p) = json {
                write_json_dump(p, &prep.graph)?;
            }
            Ok(())
        }
        Command::TrainEmbed {
            input,
            unit,
            common,
        } => {
            let cfg = common.config()?;
            let set = load_input(&input, &ColumnMap::default())?;
            let prep = prepare_unit(&set, unit.scenario.into(), &Unit::parse(&unit.unit), &cfg)?;
            let emb = train_cbow(
                &prep.embedding_sentences(cfg.embedding_corpus),
                &cfg.embedding,
            )?;
            save_embedding(&common.out, &emb)?;
            Ok(())
        }
        Command::Run {
            input,
            scenario,
            pairs,
            projects,
            repeats,
            csv,
            artifacts,
            save_models,
            common,
        } => {
            let mut cfg = common.config()?;
            if let Some(r) = repeats {
                cfg.repeats = r;
            }
            let set = load_input(&input, &ColumnMap::default())?;
            let kind: Scenario = scenario.into();
            let mut spec = ScenarioSpec::standard(kind, &set, &cfg);
            let chosen: Vec<&String> = if kind == Scenario::WithinProject {
                projects.iter().collect()
            } else {
                pairs.iter().collect()
            };
            if !chosen.is_empty() {
                spec.units = chosen.into_iter().map(|u| Unit::parse(u)).collect();
            }
            let first = cfg.model.seed;
            spec.seeds = (first..first + cfg.repeats as u64).collect();
            if let Some(dir) = &artifacts {
                std::fs::create_dir_all(dir)?;
            }
            let run_cfg = spec.effective_config(&cfg);
            let report = run_scenario_with(&spec, &set, &cfg, |o| {
                let Some(dir) = &artifacts else { return Ok(()) };
                let stem = format!("{}_seed{}", o.result.unit.replace(':', "-"), o.result.seed);
                let mut w = create(&dir.join(format!("{stem}_predictions.csv")))?;
                write_predictions(&mut w, &o.predictions)?;
                let mut w = create(&dir.join(format!("{stem}_trace.csv")))?;
                o.trace.write_csv(&mut w, true)?;
                if save_models {
                    let mut c = run_cfg.clone();
                    c.set("seed", &o.result.seed.to_string())?;
                    let bundle = Bundle {
                        config: c,
                        model: o.model.clone(),
                        embedding: o.embedding.clone(),
                    };
                    save_bundle(dir.join(format!("{stem}.spbd")), &bundle)?;
                }
                Ok(())
            })?;
            write_json(&common.out, &report)?;
            if let Some(p) = csv {
                let mut w = create(&p)?;
                report.write_csv(&mut w)?;
            }
            for u in &report.units {
                log::info!("{}: MAE {:.3} ± {:.3}", u.unit, u.mae_mean, u.mae_std);
            }
            Ok(())
        }
        Command::Predict {
            checkpoint,
            issues,
            out,
        } => {
            let bundle = load_bundle(&checkpoint)?;
            let cfg = &bundle.config;
            let project = issues
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .to_uppercase();
            let set = load_csv(&issues, &ColumnMap::unlabeled(), &project, &project)?;
            let masks = SplitMasks {
                assignment: set
                    .issues()
                    .iter()
                    .map(|i| (i.issue_key.clone(), Split::Test))
                    .collect(),
                scenario: Scenario::WithinProject,
                source_project: None,
                target_project: Some(project),
            };
            let norm = TextNormalizer::new(cfg.textnorm.clone())?;
            let refs: Vec<_> = set.issues().iter().collect();
            let built = graph_from_issues(&refs, &norm, cfg.input_mode, &masks)?;
            for key in &built.dropped {
                log::warn!("{key}: no text after normalization, no estimate");
            }
            let graph = built.graph;
            let features =
                init_node_embeddings(&graph, &bundle.embedding, bundle.model.config.input_dim)?;
            let rows: Vec<usize> = (0..graph.issue_keys.len()).collect();
            let est = predict(&bundle.model, &graph, &features, &rows)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(["issue_key", "estimate"])
                .map_err(std::io::Error::other)?;
            for (&r, estimate) in rows.iter().zip(est) {
                w.write_record([graph.issue_keys[r].as_str(), &format!("{estimate:?}")])
                    .map_err(std::io::Error::other)?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
