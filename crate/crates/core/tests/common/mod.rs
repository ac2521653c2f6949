//! Shared fixtures for the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spgraph::corpus::{Issue, IssueSet};
use spgraph::issuegraph::{NodeType, RelationType};
use spgraph::model::{
    hgt_backward_with, hgt_forward, loss_ce, loss_l1, HgtParams, HgtShape, Matrix, Parameters,
    Topology,
};

/// Two issues, 12 nodes, every relation (and its mirror) populated, and for
/// every relation at least one target with two or more incoming edges.
///
/// Issue 0: Document 0, Title 0 (Sentence 0), Description 0 (Sentence 1,
/// CodeParts 0 and 1). Issue 1: Document 1, Title 1 (Sentence 2). Word 0 is
/// in all three sentences; CodeToken 0 is in both code parts.
pub fn tiny_topology() -> Topology {
    use spgraph::issuegraph::BaseRelation::*;
    let mut counts = [0; NodeType::COUNT];
    for (t, n) in [
        (NodeType::Document, 2),
        (NodeType::Title, 2),
        (NodeType::Description, 1),
        (NodeType::Sentence, 3),
        (NodeType::CodePart, 2),
        (NodeType::Word, 1),
        (NodeType::CodeToken, 1),
    ] {
        counts[t.index()] = n;
    }
    let rels: Vec<RelationType> = RelationType::all().collect();
    let edges = rels
        .iter()
        .map(|r| {
            let up: Vec<(u32, u32)> = match r.base {
                TitleOf => vec![(0, 0), (1, 1)],
                DescOf => vec![(0, 0)],
                SentOfTitle => vec![(0, 0), (2, 1)],
                SentOfDesc => vec![(1, 0)],
                CodeOfDesc => vec![(0, 0), (1, 0)],
                WordIn => vec![(0, 0), (0, 1), (0, 2)],
                TokenIn => vec![(0, 0), (0, 1)],
            };
            if r.reversed {
                up.into_iter().map(|(s, d)| (d, s)).collect()
            } else {
                up
            }
        })
        .collect();
    Topology::new(counts, rels, edges)
}

pub fn random_features(topo: &Topology, dim: usize, seed: u64) -> Vec<Matrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NodeType::ALL
        .iter()
        .map(|t| {
            let n = topo.count(*t);
            Matrix::from_vec(
                n,
                dim,
                (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect()
}

/// Parameters with every entry (biases and priors included) randomized.
pub fn random_params(topo: &Topology, shape: HgtShape, seed: u64) -> HgtParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = HgtParams::init(shape, &topo.relations, &mut rng);
    for t in p.tensors_mut() {
        t.data
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-0.6..0.6));
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckLoss {
    L1,
    CrossEntropy,
}

/// Per-tensor relative error `|g_a − g_n| / (|g_a| + |g_n|)` between the
/// analytic gradient and central differences with step `h`.
pub struct GradReport {
    pub per_tensor: Vec<(String, f64)>,
    pub scalars: usize,
    /// Tensors whose analytic and numeric gradients are both zero.
    pub unexercised: Vec<String>,
}

impl GradReport {
    pub fn worst(&self) -> (String, f64) {
        self.per_tensor
            .iter()
            .cloned()
            .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
    }
}

/// Objective: task loss on the Document head plus a fixed random linear
/// functional of every node's final state, so that every parameter
/// influences the value.
pub fn hgt_gradcheck(kind: CheckLoss, h: f64) -> GradReport {
    let topo = tiny_topology();
    let outputs = if kind == CheckLoss::L1 { 1 } else { 3 };
    let shape = HgtShape {
        input_dim: 5,
        hidden: 8,
        heads: 2,
        layers: 2,
        outputs,
    };
    let x = random_features(&topo, 5, 11);
    let params = random_params(&topo, shape, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let probe: Vec<Matrix> = NodeType::ALL
        .iter()
        .map(|t| {
            let n = topo.count(*t) * shape.hidden;
            Matrix::from_vec(
                topo.count(*t),
                shape.hidden,
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let mask = vec![0, 1];

    // Targets far from the initial predictions keep L1 away from its kink.
    let (pred0, _) = hgt_forward(&params, &topo, &x).unwrap();
    let targets: Vec<f64> = pred0
        .data
        .iter()
        .enumerate()
        .map(|(i, p)| p + 3.0 + i as f64)
        .collect();
    let labels = vec![2usize, 0];

    let objective = |p: &HgtParams| -> (f64, Matrix, spgraph::model::hgt::ForwardCache) {
        let (pred, cache) = hgt_forward(p, &topo, &x).unwrap();
        let (loss, dpred) = match kind {
            CheckLoss::L1 => {
                let (l, g) = loss_l1(&pred.data, &targets, &mask).unwrap();
                (l, Matrix::from_vec(pred.rows, 1, g))
            }
            CheckLoss::CrossEntropy => loss_ce(&pred, &labels, &mask).unwrap(),
        };
        let lin: f64 = cache
            .out
            .iter()
            .zip(&probe)
            .map(|(a, b)| a.data.iter().zip(&b.data).map(|(u, v)| u * v).sum::<f64>())
            .sum();
        (loss + lin, dpred, cache)
    };

    let (_, dpred, cache) = objective(&params);
    let analytic = hgt_backward_with(&params, &topo, &x, &cache, &dpred, &probe);
    let names = params.names();
    let mut per_tensor = Vec::new();
    let mut scalars = 0;
    let mut unexercised = Vec::new();
    for (ti, name) in names.iter().enumerate() {
        let ga = &analytic.tensors()[ti].data;
        let mut diff2 = 0.0;
        let mut norm_a = 0.0;
        let mut norm_n = 0.0;
        for (j, &gj) in ga.iter().enumerate() {
            let mut plus = params.clone();
            plus.tensors_mut()[ti].data[j] += h;
            let mut minus = params.clone();
            minus.tensors_mut()[ti].data[j] -= h;
            let gn = (objective(&plus).0 - objective(&minus).0) / (2.0 * h);
            diff2 += (gj - gn).powi(2);
            norm_a += gj * gj;
            norm_n += gn * gn;
            scalars += 1;
        }
        let denom = norm_a.sqrt() + norm_n.sqrt();
        if denom < 1e-12 {
            unexercised.push(name.clone());
        }
        let rel = if denom < 1e-12 {
            0.0
        } else {
            diff2.sqrt() / denom
        };
        per_tensor.push((name.clone(), rel));
    }
    GradReport {
        per_tensor,
        scalars,
        unexercised,
    }
}

/// Issues where the story point is 1 when the title says "simple" and 8
/// otherwise, 30 of each, interleaved.
pub fn synthetic_simple_corpus() -> IssueSet {
    let subjects = [
        "parser",
        "login page",
        "export job",
        "cache layer",
        "search index",
        "upload form",
    ];
    let verbs = ["fix", "update", "refactor", "add logging to", "document"];
    let issues = (0..60)
        .map(|i| {
            let simple = i % 2 == 0;
            let subject = subjects[i % subjects.len()];
            let verb = verbs[(i / 2) % verbs.len()];
            let title = if simple {
                format!("simple {verb} {subject}")
            } else {
                format!("{verb} {subject} across modules")
            };
            let description = format!(
                "The {subject} needs work. Steps are listed in ticket {}.\n{{code}}run_{}(){{code}}",
                i + 100,
                subject.replace(' ', "_")
            );
            Issue {
                issue_key: format!("SYN-{:03}", i + 1),
                project: "SYN".into(),
                repository: "Synthetic".into(),
                title,
                description,
                story_point: Some(if simple { 1.0 } else { 8.0 }),
                ordinal: i,
            }
        })
        .collect();
    IssueSet::new(issues).unwrap()
}

/// A run configuration small enough for debug-speed tests.
pub fn small_config() -> spgraph::harness::RunConfig {
    let mut c = spgraph::harness::RunConfig::default();
    c.set("embedding_dim", "16").unwrap();
    c.set("embedding_buckets", "4096").unwrap();
    c.set("embedding_epochs", "2").unwrap();
    c.set("hidden_channels", "16").unwrap();
    c.set("attention_heads", "2").unwrap();
    c
}

/// The first `n` synthetic issues, every label replaced by `label`.
pub fn constant_corpus(n: usize, label: f64) -> IssueSet {
    let issues = synthetic_simple_corpus()
        .issues()
        .iter()
        .take(n)
        .cloned()
        .map(|mut i| {
            i.story_point = Some(label);
            i
        })
        .collect();
    IssueSet::new(issues).unwrap()
}

/// Within-project graph and embedding features for `set`'s only project.
pub fn graph_and_features(
    set: &IssueSet,
    cfg: &spgraph::harness::RunConfig,
) -> (
    spgraph::harness::PreparedUnit,
    Vec<spgraph::embedding::FeatureTable>,
) {
    use spgraph::corpus::Scenario;
    use spgraph::harness::{prepare_unit, Unit};
    let project = set.projects().next().unwrap().to_string();
    let prep = prepare_unit(set, Scenario::WithinProject, &Unit::Project(project), cfg).unwrap();
    let emb = spgraph::embedding::train_cbow(
        &prep.embedding_sentences(cfg.embedding_corpus),
        &cfg.embedding,
    )
    .unwrap();
    let feats =
        spgraph::embedding::init_node_embeddings(&prep.graph, &emb, cfg.model.input_dim).unwrap();
    (prep, feats)
}
