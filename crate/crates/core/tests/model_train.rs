mod common;

use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spgraph::corpus::{Issue, IssueSet, Scenario, Split};
use spgraph::embedding::{init_node_embeddings, train_cbow};
use spgraph::harness::{prepare_unit, Unit};
use spgraph::issuegraph::NodeType;
use spgraph::model::{
    features_to_matrices, gcn_backward, gcn_forward, hgt_forward, load_model, predict, prepare,
    save_model, train, GcnParams, HgtParams, HgtShape, Matrix, ModelKind, ModelParams,
    NormAdjacency, Parameters, Prepared, Topology,
};

use common::{constant_corpus, graph_and_features, small_config};

#[test]
fn constant_target_is_fitted() {
    let cfg = small_config();
    let set = constant_corpus(20, 7.0);
    let (prep, feats) = graph_and_features(&set, &cfg);
    let out = train(ModelKind::Hgt, &prep.graph, &feats, &cfg.model).unwrap();
    let rows = prep.graph.documents_in(Split::Train);
    let p = predict(&out.model, &prep.graph, &feats, &rows).unwrap();
    for v in p {
        assert!((v - 7.0).abs() < 0.2, "prediction {v}");
    }
    let loss = |e: usize| out.trace.epochs[e].loss;
    assert!(loss(50) < loss(0));
}

#[test]
fn zero_epochs_keep_initial_parameters() {
    let mut cfg = small_config();
    cfg.model.epochs = 0;
    cfg.model.seed = 3;
    let set = constant_corpus(10, 2.0);
    let (prep, feats) = graph_and_features(&set, &cfg);
    let out = train(ModelKind::Hgt, &prep.graph, &feats, &cfg.model).unwrap();
    assert!(out.trace.is_empty());

    let Prepared::Hgt { topo, .. } =
        prepare(ModelKind::Hgt, &prep.graph, &feats, &cfg.model).unwrap()
    else {
        unreachable!()
    };
    let shape = HgtShape {
        input_dim: cfg.model.input_dim,
        hidden: cfg.model.hidden,
        heads: cfg.model.heads,
        layers: cfg.model.layers,
        outputs: 1,
    };
    let init = HgtParams::init(shape, &topo.relations, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(out.model.params, ModelParams::Hgt(init));
}

#[test]
fn same_seed_gives_identical_trace() {
    let mut cfg = small_config();
    cfg.model.epochs = 20;
    let set = common::synthetic_simple_corpus();
    let (prep, feats) = graph_and_features(&set, &cfg);
    let csv = |kind| {
        let out = train(kind, &prep.graph, &feats, &cfg.model).unwrap();
        let mut buf = Vec::new();
        out.trace.write_csv(&mut buf, false).unwrap();
        (buf, out.model.params)
    };
    for kind in [ModelKind::Hgt, ModelKind::Gcn] {
        let (a, pa) = csv(kind);
        let (b, pb) = csv(kind);
        assert_eq!(a, b);
        assert_eq!(pa, pb);
    }
}

fn issue(key: &str, title: &str, description: &str) -> Issue {
    Issue {
        issue_key: key.into(),
        project: "P".into(),
        repository: "R".into(),
        title: title.into(),
        description: description.into(),
        story_point: Some(3.0),
        ordinal: 0,
    }
}

#[test]
fn disjoint_copy_leaves_predictions_unchanged() {
    let mut cfg = small_config();
    cfg.model.epochs = 5;
    let a = issue(
        "P-1",
        "crash on startup",
        "The server fails. {code}boot(){code}",
    );
    let mut b = issue(
        "P-2",
        "slow report export",
        "Exports hang. {code}drain(){code}",
    );
    b.ordinal = 1;
    let one = IssueSet::new(vec![a.clone()]).unwrap();
    let two = IssueSet::new(vec![a, b]).unwrap();
    let unit = Unit::Project("P".into());

    let p2 = prepare_unit_any(&two, &unit, &cfg);
    let p1 = prepare_unit_any(&one, &unit, &cfg);
    let emb = train_cbow(
        &p2.embedding_sentences(cfg.embedding_corpus),
        &cfg.embedding,
    )
    .unwrap();
    let f1 = init_node_embeddings(&p1.graph, &emb, cfg.model.input_dim).unwrap();
    let f2 = init_node_embeddings(&p2.graph, &emb, cfg.model.input_dim).unwrap();

    for kind in [ModelKind::Hgt, ModelKind::Gcn] {
        let model = train(kind, &p2.graph, &f2, &cfg.model).unwrap().model;
        let r1 = p1.graph.document_index("P-1").unwrap();
        let r2 = p2.graph.document_index("P-1").unwrap();
        let y1 = predict(&model, &p1.graph, &f1, &[r1]).unwrap();
        let y2 = predict(&model, &p2.graph, &f2, &[r2]).unwrap();
        assert_abs_diff_eq!(y1[0], y2[0], epsilon = 1e-12);
    }
}

// Prepares without the Test-split check, for fully-Train toy sets.
fn prepare_unit_any(
    set: &IssueSet,
    unit: &Unit,
    cfg: &spgraph::harness::RunConfig,
) -> spgraph::harness::PreparedUnit {
    let mut c = cfg.clone();
    c.ratios.train = 0.0;
    c.ratios.valid = 0.0;
    c.ratios.test = 1.0;
    let mut p = prepare_unit(set, Scenario::WithinProject, unit, &c).unwrap();
    p.graph.splits.iter_mut().for_each(|s| *s = Split::Train);
    p.masks
        .assignment
        .values_mut()
        .for_each(|s| *s = Split::Train);
    p
}

#[test]
fn pruned_forward_matches_full_forward() {
    let cfg = small_config();
    let set = common::synthetic_simple_corpus();
    let (prep, feats) = graph_and_features(&set, &cfg);
    let full = Topology::from_graph(&prep.graph, false);
    let shape = HgtShape {
        input_dim: cfg.model.input_dim,
        hidden: cfg.model.hidden,
        heads: cfg.model.heads,
        layers: cfg.model.layers,
        outputs: 1,
    };
    let params = HgtParams::init(shape, &full.relations, &mut ChaCha8Rng::seed_from_u64(1));
    let (y_full, _) = hgt_forward(&params, &full, &features_to_matrices(&feats)).unwrap();
    let Prepared::Hgt { topo, x } =
        prepare(ModelKind::Hgt, &prep.graph, &feats, &cfg.model).unwrap()
    else {
        unreachable!()
    };
    assert!(
        topo.count(NodeType::Word) < full.count(NodeType::Word) || full.count(NodeType::Word) == 0
    );
    let (y_pruned, _) = hgt_forward(&params, &topo, &x).unwrap();
    assert_eq!(y_full.rows, y_pruned.rows);
    for (a, b) in y_full.data.iter().zip(&y_pruned.data) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn gcn_isolated_node_is_plain_relu_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = GcnParams::init(3, 4, 1, 1, &mut rng);
    let x = Matrix::from_vec(1, 3, vec![0.5, -1.0, 2.0]);
    let adj = NormAdjacency::new(1, &[], &[1]);
    let (y, _) = gcn_forward(&p, &adj, &x, &[0]).unwrap();
    let w = &p.layers[0];
    let h: Vec<f64> = (0..4)
        .map(|j| {
            (0..3)
                .map(|i| x.data[i] * w.row(i)[j])
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    let expect: f64 = h
        .iter()
        .zip(&p.head.w.data)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + p.head.b.data[0];
    assert_abs_diff_eq!(y.data[0], expect, epsilon = 1e-12);
}

#[test]
fn gcn_zero_weights_predict_zero() {
    let mut p = GcnParams::init(3, 4, 2, 1, &mut ChaCha8Rng::seed_from_u64(0));
    p.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
    let x = Matrix::from_vec(3, 3, (0..9).map(|v| v as f64).collect());
    let adj = NormAdjacency::new(3, &[(0, 1), (1, 2)], &[2, 3, 2]);
    let (y, _) = gcn_forward(&p, &adj, &x, &[0, 2]).unwrap();
    assert_eq!(y.data, vec![0.0, 0.0]);
}

#[test]
fn gcn_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = GcnParams::init(4, 6, 2, 1, &mut rng);
    let n = 6;
    let edges = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4), (4, 5)];
    let mut degree = vec![1usize; n];
    for &(a, b) in &edges {
        degree[a as usize] += 1;
        degree[b as usize] += 1;
    }
    let adj = NormAdjacency::new(n, &edges, &degree);
    let x = Matrix::from_vec(
        n,
        4,
        (0..n * 4)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0)
            .collect(),
    );
    let docs = [0usize, 3, 5];
    let targets = [5.0, -4.0, 6.0];
    let objective = |q: &GcnParams| -> f64 {
        let (y, _) = gcn_forward(q, &adj, &x, &docs).unwrap();
        y.data
            .iter()
            .zip(&targets)
            .map(|(a, t)| (a - t).abs())
            .sum::<f64>()
            / 3.0
    };
    let (y, cache) = gcn_forward(&p, &adj, &x, &docs).unwrap();
    let dpred = Matrix::from_vec(
        3,
        1,
        y.data
            .iter()
            .zip(&targets)
            .map(|(a, t)| (a - t).signum() / 3.0)
            .collect(),
    );
    let g = gcn_backward(&p, &adj, &cache, &docs, &dpred);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut q = p.clone();
    for (ti, gt) in g.tensors().iter().enumerate() {
        for k in 0..gt.data.len() {
            let orig = q.tensors()[ti].data[k];
            q.tensors_mut()[ti].data[k] = orig + h;
            let up = objective(&q);
            q.tensors_mut()[ti].data[k] = orig - h;
            let down = objective(&q);
            q.tensors_mut()[ti].data[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - gt.data[k]).abs() / fd.abs().max(gt.data[k].abs()).max(1e-8);
            worst = worst.max(if fd.abs() < 1e-10 && gt.data[k].abs() < 1e-10 {
                0.0
            } else {
                err
            });
        }
    }
    assert!(worst < 1e-4, "worst relative error {worst}");
}

#[test]
fn checkpoint_round_trip_predicts_identically() {
    let mut cfg = small_config();
    cfg.model.epochs = 5;
    let set = common::synthetic_simple_corpus();
    let (prep, feats) = graph_and_features(&set, &cfg);
    let rows = prep.test_rows();
    let dir = tempfile::tempdir().unwrap();
    for (kind, task) in [
        (ModelKind::Hgt, spgraph::model::Task::Regression),
        (ModelKind::Gcn, spgraph::model::Task::Regression),
        (ModelKind::Hgt, spgraph::model::Task::Classification),
    ] {
        let mut c = cfg.model.clone();
        c.task = task;
        let model = train(kind, &prep.graph, &feats, &c).unwrap().model;
        let path = dir.path().join("m.spmp");
        save_model(&path, &model).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
        assert_eq!(
            predict(&back, &prep.graph, &feats, &rows).unwrap(),
            predict(&model, &prep.graph, &feats, &rows).unwrap()
        );
    }
}
