use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gcn::{gcn_backward, gcn_forward, GcnCache, GcnParams};
use super::hgt::{hgt_backward, hgt_forward, ForwardCache, HgtParams, HgtShape};
use super::loss::{loss_ce, loss_l1};
use super::params::{Adam, Parameters};
use super::tensor::Matrix;
use super::topology::{NormAdjacency, Topology};
use super::{argmax, ClassMap, HgtConfig, ModelError, ModelKind, Task};
use crate::corpus::Split;
use crate::embedding::FeatureTable;
use crate::issuegraph::{type_erase, HeteroGraph, NodeType};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Hgt(HgtParams),
    Gcn(GcnParams),
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&Matrix> {
        match self {
            ModelParams::Hgt(p) => p.tensors(),
            ModelParams::Gcn(p) => p.tensors(),
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        match self {
            ModelParams::Hgt(p) => p.tensors_mut(),
            ModelParams::Gcn(p) => p.tensors_mut(),
        }
    }

    fn names(&self) -> Vec<String> {
        match self {
            ModelParams::Hgt(p) => p.names(),
            ModelParams::Gcn(p) => p.names(),
        }
    }
}

/// A model ready for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub config: HgtConfig,
    pub params: ModelParams,
    pub class_map: Option<ClassMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub valid_mae: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    /// Number of Document rows the loss was computed over (all Train).
    pub loss_rows: usize,
}

impl TrainTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// CSV with columns `epoch,loss,valid_mae[,seconds]`.
    pub fn write_csv<W: Write>(&self, w: W, with_seconds: bool) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["epoch", "loss", "valid_mae"];
        if with_seconds {
            header.push("seconds");
        }
        out.write_record(&header)?;
        for r in &self.epochs {
            let mut rec = vec![
                r.epoch.to_string(),
                format!("{:?}", r.loss),
                r.valid_mae.map(|v| format!("{v:?}")).unwrap_or_default(),
            ];
            if with_seconds {
                rec.push(format!("{:.6}", r.seconds));
            }
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The model used for prediction: final parameters, or the best-valid
    /// ones when `select_best_valid` is set.
    pub model: TrainedModel,
    pub trace: TrainTrace,
    /// Epoch and Valid MAE of the best-valid parameters.
    pub best_valid: Option<(usize, f64)>,
    pub best_params: Option<ModelParams>,
}

/// Model inputs restricted to what affects Document outputs.
#[derive(Debug, Clone)]
pub enum Prepared {
    Hgt {
        topo: Topology,
        x: Vec<Matrix>,
    },
    Gcn {
        adj: NormAdjacency,
        x: Matrix,
        doc_rows: Vec<usize>,
    },
}

pub fn features_to_matrices(features: &[FeatureTable]) -> Vec<Matrix> {
    features
        .iter()
        .map(|f| Matrix::from_vec(f.rows, f.dim, f.data.iter().map(|&v| v as f64).collect()))
        .collect()
}

/// Builds the model inputs. Only nodes within `cfg.layers` hops of a
/// Document are kept, which leaves Document outputs unchanged.
pub fn prepare(
    kind: ModelKind,
    graph: &HeteroGraph,
    features: &[FeatureTable],
    cfg: &HgtConfig,
) -> Result<Prepared, ModelError> {
    if features.len() != NodeType::COUNT {
        return Err(ModelError::ShapeMismatch(format!(
            "{} feature tables",
            features.len()
        )));
    }
    for t in NodeType::ALL {
        let f = &features[t.index()];
        if f.rows != graph.num_nodes(t) || f.dim != cfg.input_dim {
            return Err(ModelError::ShapeMismatch(format!(
                "{} features {}×{} for {} nodes, input_dim {}",
                t.name(),
                f.rows,
                f.dim,
                graph.num_nodes(t),
                cfg.input_dim
            )));
        }
    }
    let x = features_to_matrices(features);
    match kind {
        ModelKind::Hgt => {
            let full = Topology::from_graph(graph, cfg.upward_only);
            let (topo, rows) = full.receptive_field(cfg.layers);
            let x = x.iter().zip(&rows).map(|(m, r)| m.gather_rows(r)).collect();
            Ok(Prepared::Hgt { topo, x })
        }
        ModelKind::Gcn => {
            let homo = type_erase(graph);
            let degree = homo.degrees_with_self_loops();
            let mut adj: Vec<Vec<u32>> = vec![Vec::new(); homo.num_nodes];
            for &(a, b) in &homo.edges {
                adj[a as usize].push(b);
                adj[b as usize].push(a);
            }
            let mut keep = vec![false; homo.num_nodes];
            let mut frontier = homo.document_rows.clone();
            frontier.iter().for_each(|&d| keep[d] = true);
            for _ in 0..cfg.layers {
                let mut next = Vec::new();
                for &v in &frontier {
                    for &u in &adj[v] {
                        if !keep[u as usize] {
                            keep[u as usize] = true;
                            next.push(u as usize);
                        }
                    }
                }
                frontier = next;
            }
            let kept: Vec<usize> = (0..homo.num_nodes).filter(|&i| keep[i]).collect();
            let mut local = vec![u32::MAX; homo.num_nodes];
            for (i, &g) in kept.iter().enumerate() {
                local[g] = i as u32;
            }
            let edges: Vec<(u32, u32)> = homo
                .edges
                .iter()
                .filter(|(a, b)| keep[*a as usize] && keep[*b as usize])
                .map(|&(a, b)| (local[a as usize], local[b as usize]))
                .collect();
            let deg: Vec<usize> = kept.iter().map(|&g| degree[g]).collect();
            let adj = NormAdjacency::new(kept.len(), &edges, &deg);
            let mut all = Matrix::zeros(0, cfg.input_dim);
            for m in &x {
                all.data.extend_from_slice(&m.data);
                all.rows += m.rows;
            }
            let xm = all.gather_rows(&kept);
            let doc_rows = homo
                .document_rows
                .iter()
                .map(|&g| local[g] as usize)
                .collect();
            Ok(Prepared::Gcn {
                adj,
                x: xm,
                doc_rows,
            })
        }
    }
}

enum Cache {
    Hgt(ForwardCache),
    Gcn(GcnCache),
}

fn forward(prep: &Prepared, params: &ModelParams) -> Result<(Matrix, Cache), ModelError> {
    match (prep, params) {
        (Prepared::Hgt { topo, x }, ModelParams::Hgt(p)) => {
            let (y, c) = hgt_forward(p, topo, x)?;
            Ok((y, Cache::Hgt(c)))
        }
        (Prepared::Gcn { adj, x, doc_rows }, ModelParams::Gcn(p)) => {
            let (y, c) = gcn_forward(p, adj, x, doc_rows)?;
            Ok((y, Cache::Gcn(c)))
        }
        _ => Err(ModelError::ShapeMismatch(
            "model kind differs from prepared inputs".into(),
        )),
    }
}

fn backward(prep: &Prepared, params: &ModelParams, cache: &Cache, dpred: &Matrix) -> ModelParams {
    match (prep, params, cache) {
        (Prepared::Hgt { topo, x }, ModelParams::Hgt(p), Cache::Hgt(c)) => {
            ModelParams::Hgt(hgt_backward(p, topo, x, c, dpred))
        }
        (Prepared::Gcn { adj, doc_rows, .. }, ModelParams::Gcn(p), Cache::Gcn(c)) => {
            ModelParams::Gcn(gcn_backward(p, adj, c, doc_rows, dpred))
        }
        _ => unreachable!("forward checked the pairing"),
    }
}

fn activations_finite(cache: &Cache) -> bool {
    match cache {
        Cache::Hgt(c) => c.out.iter().chain(&c.h0).all(Matrix::is_finite),
        Cache::Gcn(c) => c.is_finite(),
    }
}

/// Raw model outputs for every Document row (1 column for regression, one
/// logit per class otherwise).
pub fn predict_outputs(model: &TrainedModel, prep: &Prepared) -> Result<Matrix, ModelError> {
    Ok(forward(prep, &model.params)?.0)
}

fn estimates(out: &Matrix, class_map: Option<&ClassMap>) -> Vec<f64> {
    (0..out.rows)
        .map(|r| match class_map {
            Some(m) => m.value_of(argmax(out.row(r))),
            None => out.row(r)[0],
        })
        .collect()
}

/// Story-point estimates for the Document rows in `rows`. Regression
/// outputs are returned as is; classification maps the argmax class back
/// to its story-point value.
pub fn predict(
    model: &TrainedModel,
    graph: &HeteroGraph,
    features: &[FeatureTable],
    rows: &[usize],
) -> Result<Vec<f64>, ModelError> {
    let prep = prepare(model.kind, graph, features, &model.config)?;
    let out = predict_outputs(model, &prep)?;
    let est = estimates(&out, model.class_map.as_ref());
    Ok(rows.iter().map(|&r| est[r]).collect())
}

fn init_params(kind: ModelKind, cfg: &HgtConfig, prep: &Prepared, outputs: usize) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match (kind, prep) {
        (ModelKind::Hgt, Prepared::Hgt { topo, .. }) => {
            let shape = HgtShape {
                input_dim: cfg.input_dim,
                hidden: cfg.hidden,
                heads: cfg.heads,
                layers: cfg.layers,
                outputs,
            };
            ModelParams::Hgt(HgtParams::init(shape, &topo.relations, &mut rng))
        }
        _ => ModelParams::Gcn(GcnParams::init(
            cfg.input_dim,
            cfg.hidden,
            cfg.layers,
            outputs,
            &mut rng,
        )),
    }
}

/// Full-batch training on the Train Documents of `graph`.
///
/// Runs exactly `cfg.epochs` optimizer steps. Each epoch's loss and Valid
/// MAE come from the same forward pass, before that epoch's update.
pub fn train(
    kind: ModelKind,
    graph: &HeteroGraph,
    features: &[FeatureTable],
    cfg: &HgtConfig,
) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    let train_rows = graph.documents_in(Split::Train);
    let valid_rows: Vec<usize> = graph
        .documents_in(Split::Valid)
        .into_iter()
        .filter(|&r| graph.labels[r].is_finite())
        .collect();
    if train_rows.is_empty() {
        return Err(ModelError::EmptyMask);
    }
    for &r in &train_rows {
        if graph.splits[r] != Split::Train || !graph.labels[r].is_finite() {
            return Err(ModelError::MaskViolation { row: r });
        }
    }
    let class_map = match cfg.task {
        Task::Regression => None,
        Task::Classification => Some(ClassMap::from_values(
            train_rows.iter().map(|&r| graph.labels[r]),
        )?),
    };
    let class_labels: Vec<usize> = match &class_map {
        Some(m) => graph
            .labels
            .iter()
            .map(|&l| m.index_of(l).unwrap_or(usize::MAX))
            .collect(),
        None => Vec::new(),
    };
    let outputs = class_map.as_ref().map_or(1, ClassMap::len);

    let prep = prepare(kind, graph, features, cfg)?;
    let mut params = init_params(kind, cfg, &prep, outputs);
    let mut opt = Adam::new(&params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut trace = TrainTrace {
        epochs: Vec::with_capacity(cfg.epochs),
        loss_rows: train_rows.len(),
    };
    let mut best: Option<(usize, f64, ModelParams)> = None;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let (out, cache) = forward(&prep, &params)?;
        if !out.is_finite() || !activations_finite(&cache) {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                what: "activation".into(),
            });
        }
        debug_assert!(train_rows.iter().all(|&r| graph.splits[r] == Split::Train));
        log::trace!(
            "epoch {epoch}: loss over {} train documents",
            train_rows.len()
        );
        let (loss, dout) = match cfg.task {
            Task::Regression => {
                let pred: Vec<f64> = out.data.clone();
                let (l, g) = loss_l1(&pred, &graph.labels, &train_rows)?;
                (l, Matrix::from_vec(out.rows, 1, g))
            }
            Task::Classification => loss_ce(&out, &class_labels, &train_rows)?,
        };
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                what: "loss".into(),
            });
        }
        let valid_mae = (!valid_rows.is_empty()).then(|| {
            let est = estimates(&out, class_map.as_ref());
            valid_rows
                .iter()
                .map(|&r| (est[r] - graph.labels[r]).abs())
                .sum::<f64>()
                / valid_rows.len() as f64
        });
        if let Some(v) = valid_mae {
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((epoch, v, params.clone()));
            }
        }
        let grads = backward(&prep, &params, &cache, &dout);
        if !grads.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                epoch,
                what: "gradient".into(),
            });
        }
        opt.step(&mut params, &grads);
        trace.epochs.push(EpochRecord {
            epoch,
            loss,
            valid_mae,
            seconds: start.elapsed().as_secs_f64(),
        });
        if epoch % 50 == 0 {
            log::debug!("epoch {epoch}: loss {loss:.4} valid_mae {valid_mae:?}");
        }
    }

    let best_valid = best.as_ref().map(|b| (b.0, b.1));
    let best_params = best.map(|b| b.2);
    let chosen = match (&best_params, cfg.select_best_valid) {
        (Some(p), true) => p.clone(),
        _ => params,
    };
    Ok(TrainOutcome {
        model: TrainedModel {
            kind,
            config: cfg.clone(),
            params: chosen,
            class_map,
        },
        trace,
        best_valid,
        best_params,
    })
}
