mod common;

use common::{hgt_gradcheck, random_features, random_params, tiny_topology, CheckLoss};
use proptest::prelude::*;
use spgraph::issuegraph::NodeType;
use spgraph::model::{hgt_forward, hgt_layer_forward, HgtShape, Parameters, Topology};

fn shape() -> HgtShape {
    HgtShape {
        input_dim: 5,
        hidden: 8,
        heads: 2,
        layers: 2,
        outputs: 1,
    }
}

#[test]
fn gradients_match_finite_differences_l1() {
    let r = hgt_gradcheck(CheckLoss::L1, 1e-4);
    let (name, worst) = r.worst();
    assert!(worst < 1e-4, "{name}: {worst:e}");
    assert!(
        r.unexercised.is_empty(),
        "zero gradient: {:?}",
        r.unexercised
    );
}

#[test]
fn gradients_match_finite_differences_ce() {
    let r = hgt_gradcheck(CheckLoss::CrossEntropy, 1e-4);
    let (name, worst) = r.worst();
    assert!(worst < 1e-4, "{name}: {worst:e}");
    assert!(
        r.unexercised.is_empty(),
        "zero gradient: {:?}",
        r.unexercised
    );
}

#[test]
fn zero_layer_weights_are_identity() {
    let topo = tiny_topology();
    let mut p = random_params(&topo, shape(), 1);
    for l in &mut p.layers {
        let mut lp = l.clone();
        for lin in
            lp.k.iter_mut()
                .chain(&mut lp.q)
                .chain(&mut lp.m)
                .chain(&mut lp.a)
        {
            lin.w.fill(0.0);
            lin.b.fill(0.0);
        }
        lp.att
            .iter_mut()
            .chain(&mut lp.msg)
            .flatten()
            .for_each(|m| m.fill(0.0));
        lp.mu.fill(0.0);
        *l = lp;
    }
    let h = random_features(&topo, 8, 2);
    let (out, _) = hgt_layer_forward(&p.layers[0], &p.shape, &topo, &h);
    assert_eq!(out, h);
}

#[test]
fn zero_weights_predict_zero() {
    let topo = tiny_topology();
    let mut p = random_params(&topo, shape(), 3);
    p.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
    let (pred, _) = hgt_forward(&p, &topo, &random_features(&topo, 5, 4)).unwrap();
    assert_eq!(pred.data, vec![0.0, 0.0]);
}

#[test]
fn attention_sums_to_one() {
    let topo = tiny_topology();
    let p = random_params(&topo, shape(), 5);
    let (_, cache) = hgt_forward(&p, &topo, &random_features(&topo, 5, 6)).unwrap();
    for layer in &cache.layers {
        for t in NodeType::ALL {
            let inc = &topo.incoming[t.index()];
            for v in 0..topo.count(t) {
                let r = inc.range(v);
                if r.is_empty() {
                    continue;
                }
                for head in 0..2 {
                    let s: f64 = r
                        .clone()
                        .map(|e| layer.alpha[t.index()][e * 2 + head])
                        .sum();
                    assert!((s - 1.0).abs() < 1e-6);
                    if r.len() == 1 {
                        assert_eq!(layer.alpha[t.index()][r.start * 2 + head], 1.0);
                    }
                }
            }
        }
    }
}

/// Renumbers the rows of every type by `perm[t][old] = new`.
fn permute(topo: &Topology, perm: &[Vec<u32>]) -> Topology {
    let edges = topo
        .relations
        .iter()
        .zip(&topo.edges)
        .map(|(r, es)| {
            es.iter()
                .map(|&(s, d)| {
                    (
                        perm[r.src().index()][s as usize],
                        perm[r.dst().index()][d as usize],
                    )
                })
                .collect()
        })
        .collect();
    Topology::new(topo.counts, topo.relations.clone(), edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_is_permutation_equivariant(seed in 0u64..1000, shuffle in any::<[u64; 7]>()) {
        let topo = tiny_topology();
        let p = random_params(&topo, shape(), seed);
        let x = random_features(&topo, 5, seed + 1);
        let perm: Vec<Vec<u32>> = NodeType::ALL.iter().map(|t| {
            let n = topo.count(*t) as u32;
            let mut v: Vec<u32> = (0..n).collect();
            v.sort_by_key(|i| (shuffle[t.index()].rotate_left(*i * 7) ^ *i as u64, *i));
            v
        }).collect();
        let ptopo = permute(&topo, &perm);
        let px: Vec<_> = x.iter().enumerate().map(|(t, m)| {
            let mut out = m.clone();
            for (old, &new) in perm[t].iter().enumerate() {
                out.row_mut(new as usize).copy_from_slice(m.row(old));
            }
            out
        }).collect();
        let (a, ca) = hgt_forward(&p, &topo, &x).unwrap();
        let (b, cb) = hgt_forward(&p, &ptopo, &px).unwrap();
        let doc = NodeType::Document.index();
        for (old, &new) in perm[doc].iter().enumerate() {
            prop_assert!((a.row(old)[0] - b.row(new as usize)[0]).abs() < 1e-12);
        }
        for (t, pt) in perm.iter().enumerate() {
            for (old, &new) in pt.iter().enumerate() {
                for (u, v) in ca.out[t].row(old).iter().zip(cb.out[t].row(new as usize)) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
            }
        }
    }
}
