//! Heterogeneous graph transformer with a hand-written backward pass.
//!
//! Per layer and head `i`, an edge `s → t` of relation `φ` scores
//! `(K_i(s) · W_att[φ,i] · Q_i(t)) · μ[φ] / sqrt(d)`; scores are normalized
//! over all of `t`'s incoming edges, messages are `M_i(s) · W_msg[φ,i]`, and
//! `h'(t) = A(gelu(Σ α·msg)) + h(t)`. Targets without incoming edges keep
//! their state.

use rand::Rng;

use super::params::{Linear, Parameters};
use super::tensor::{add_a_bt, gelu, gelu_grad, gemm, Matrix};
use super::topology::Topology;
use super::ModelError;
use crate::issuegraph::{NodeType, RelationType};
use crate::par;

/// Dimensions fixed at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HgtShape {
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    pub layers: usize,
    /// 1 for regression, the class count for classification.
    pub outputs: usize,
}

impl HgtShape {
    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HgtLayer {
    pub k: Vec<Linear>,
    pub q: Vec<Linear>,
    pub m: Vec<Linear>,
    pub a: Vec<Linear>,
    /// `[slot][head]`, each `d × d`.
    pub att: Vec<Vec<Matrix>>,
    pub msg: Vec<Vec<Matrix>>,
    /// One prior per relation slot (`1 × slots`).
    pub mu: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HgtParams {
    pub shape: HgtShape,
    pub relations: Vec<RelationType>,
    pub input: Vec<Linear>,
    pub layers: Vec<HgtLayer>,
    pub head: Linear,
}

impl HgtParams {
    pub fn init<R: Rng>(shape: HgtShape, relations: &[RelationType], rng: &mut R) -> Self {
        let (hid, d) = (shape.hidden, shape.head_dim());
        let per_type = |rng: &mut R, i: usize, o: usize| -> Vec<Linear> {
            (0..NodeType::COUNT)
                .map(|_| Linear::glorot(i, o, rng))
                .collect()
        };
        let input = per_type(rng, shape.input_dim, hid);
        let layers = (0..shape.layers)
            .map(|_| {
                let k = per_type(rng, hid, hid);
                let q = per_type(rng, hid, hid);
                let m = per_type(rng, hid, hid);
                let a = per_type(rng, hid, hid);
                let blocks = |rng: &mut R| -> Vec<Vec<Matrix>> {
                    relations
                        .iter()
                        .map(|_| {
                            (0..shape.heads)
                                .map(|_| Matrix::glorot(d, d, rng))
                                .collect()
                        })
                        .collect()
                };
                let att = blocks(rng);
                let msg = blocks(rng);
                let mut mu = Matrix::zeros(1, relations.len());
                mu.fill(1.0);
                HgtLayer {
                    k,
                    q,
                    m,
                    a,
                    att,
                    msg,
                    mu,
                }
            })
            .collect();
        let head = Linear::glorot(hid, shape.outputs, rng);
        Self {
            shape,
            relations: relations.to_vec(),
            input,
            layers,
            head,
        }
    }
}

impl Parameters for HgtParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut v = Vec::new();
        for l in &self.input {
            v.extend([&l.w, &l.b]);
        }
        for layer in &self.layers {
            for group in [&layer.k, &layer.q, &layer.m, &layer.a] {
                for l in group {
                    v.extend([&l.w, &l.b]);
                }
            }
            for group in [&layer.att, &layer.msg] {
                v.extend(group.iter().flatten());
            }
            v.push(&layer.mu);
        }
        v.extend([&self.head.w, &self.head.b]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = Vec::new();
        for l in &mut self.input {
            v.extend([&mut l.w, &mut l.b]);
        }
        for layer in &mut self.layers {
            for group in [&mut layer.k, &mut layer.q, &mut layer.m, &mut layer.a] {
                for l in group {
                    v.extend([&mut l.w, &mut l.b]);
                }
            }
            for group in [&mut layer.att, &mut layer.msg] {
                v.extend(group.iter_mut().flatten());
            }
            v.push(&mut layer.mu);
        }
        v.extend([&mut self.head.w, &mut self.head.b]);
        v
    }

    fn names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for t in NodeType::ALL {
            v.extend([
                format!("input.{}.w", t.name()),
                format!("input.{}.b", t.name()),
            ]);
        }
        for i in 0..self.layers.len() {
            for g in ["k", "q", "m", "a"] {
                for t in NodeType::ALL {
                    v.push(format!("layer{i}.{g}.{}.w", t.name()));
                    v.push(format!("layer{i}.{g}.{}.b", t.name()));
                }
            }
            for g in ["att", "msg"] {
                for r in &self.relations {
                    for h in 0..self.shape.heads {
                        v.push(format!("layer{i}.{g}.{}.h{h}", r.name()));
                    }
                }
            }
            v.push(format!("layer{i}.mu"));
        }
        v.extend(["head.w".to_string(), "head.b".to_string()]);
        v
    }
}

/// Intermediate values of one layer kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub h: Vec<Matrix>,
    k: Vec<Matrix>,
    q: Vec<Matrix>,
    m: Vec<Matrix>,
    kw: Vec<Matrix>,
    mw: Vec<Matrix>,
    /// Per target type, `edge × head` attention weights.
    pub alpha: Vec<Vec<f64>>,
    raw: Vec<Vec<f64>>,
    agg: Vec<Matrix>,
    act: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub h0: Vec<Matrix>,
    pub layers: Vec<LayerCache>,
    /// Final node states per type.
    pub out: Vec<Matrix>,
    pub doc_rows: Vec<usize>,
}

fn empty(hid: usize) -> Matrix {
    Matrix::zeros(0, hid)
}

/// Which types need keys/messages (sources of a nonempty slot) and which
/// need queries and an update (targets with incoming edges).
fn needs(topo: &Topology) -> ([bool; NodeType::COUNT], [bool; NodeType::COUNT]) {
    let mut src = [false; NodeType::COUNT];
    let mut dst = [false; NodeType::COUNT];
    for (r, es) in topo.relations.iter().zip(&topo.edges) {
        if !es.is_empty() {
            src[r.src().index()] = true;
            dst[r.dst().index()] = true;
        }
    }
    (src, dst)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_shapes(p: &HgtParams, topo: &Topology, x: &[Matrix]) -> Result<(), ModelError> {
    if p.relations != topo.relations {
        return Err(ModelError::ShapeMismatch(
            "relation set differs from parameters".into(),
        ));
    }
    if x.len() != NodeType::COUNT {
        return Err(ModelError::ShapeMismatch(format!(
            "{} feature tables",
            x.len()
        )));
    }
    for t in NodeType::ALL {
        let f = &x[t.index()];
        if f.rows != topo.count(t) || (f.rows > 0 && f.cols != p.shape.input_dim) {
            return Err(ModelError::ShapeMismatch(format!(
                "{} features are {}×{}, expected {}×{}",
                t.name(),
                f.rows,
                f.cols,
                topo.count(t),
                p.shape.input_dim
            )));
        }
    }
    if p.shape.heads == 0 || !p.shape.hidden.is_multiple_of(p.shape.heads) {
        return Err(ModelError::ShapeMismatch(
            "hidden not divisible by heads".into(),
        ));
    }
    Ok(())
}

/// One layer over all node types.
pub fn hgt_layer_forward(
    p: &HgtLayer,
    shape: &HgtShape,
    topo: &Topology,
    h: &[Matrix],
) -> (Vec<Matrix>, LayerCache) {
    let (hid, heads, d) = (shape.hidden, shape.heads, shape.head_dim());
    let scale = 1.0 / (d as f64).sqrt();
    let (need_src, need_dst) = needs(topo);
    let proj = |need: &[bool; NodeType::COUNT], lin: &[Linear]| -> Vec<Matrix> {
        (0..NodeType::COUNT)
            .map(|t| {
                if need[t] {
                    lin[t].forward(&h[t])
                } else {
                    empty(hid)
                }
            })
            .collect()
    };
    let k = proj(&need_src, &p.k);
    let m = proj(&need_src, &p.m);
    let q = proj(&need_dst, &p.q);

    let mut kw = Vec::with_capacity(topo.relations.len());
    let mut mw = Vec::with_capacity(topo.relations.len());
    for (slot, (r, es)) in topo.relations.iter().zip(&topo.edges).enumerate() {
        if es.is_empty() {
            kw.push(empty(hid));
            mw.push(empty(hid));
            continue;
        }
        let s = r.src().index();
        let mut a = Matrix::zeros(h[s].rows, hid);
        let mut b = Matrix::zeros(h[s].rows, hid);
        for i in 0..heads {
            gemm(
                1.0,
                k[s].view().cols(i * d, d),
                p.att[slot][i].view(),
                0.0,
                a.view_mut().cols(i * d, d),
            );
            gemm(
                1.0,
                m[s].view().cols(i * d, d),
                p.msg[slot][i].view(),
                0.0,
                b.view_mut().cols(i * d, d),
            );
        }
        kw.push(a);
        mw.push(b);
    }

    let mut alpha = vec![Vec::new(); NodeType::COUNT];
    let mut raw = vec![Vec::new(); NodeType::COUNT];
    let mut agg = vec![empty(hid); NodeType::COUNT];
    let mut act = vec![empty(hid); NodeType::COUNT];
    let mut out: Vec<Matrix> = h.to_vec();
    for t in 0..NodeType::COUNT {
        if !need_dst[t] {
            continue;
        }
        let inc = &topo.incoming[t];
        let n = h[t].rows;
        let chunks = n.div_ceil(par::CHUNK_ROWS);
        let blocks = par::map_range(chunks, |c| {
            let rows = c * par::CHUNK_ROWS..((c + 1) * par::CHUNK_ROWS).min(n);
            let e0 = inc.offsets[rows.start];
            let e1 = inc.offsets[rows.end];
            let mut agg_b = vec![0.0; rows.len() * hid];
            let mut alpha_b = vec![0.0; (e1 - e0) * heads];
            let mut raw_b = vec![0.0; (e1 - e0) * heads];
            for v in rows.clone() {
                let qv = q[t].row(v);
                let er = inc.range(v);
                if er.is_empty() {
                    continue;
                }
                let out_row = &mut agg_b[(v - rows.start) * hid..(v - rows.start + 1) * hid];
                for i in 0..heads {
                    let cols = i * d..(i + 1) * d;
                    let mut max = f64::NEG_INFINITY;
                    for e in er.clone() {
                        let slot = inc.slot[e] as usize;
                        let s = inc.src[e] as usize;
                        let r = dot(&kw[slot].row(s)[cols.clone()], &qv[cols.clone()]);
                        let logit = r * p.mu.data[slot] * scale;
                        raw_b[(e - e0) * heads + i] = r;
                        alpha_b[(e - e0) * heads + i] = logit;
                        max = max.max(logit);
                    }
                    let mut z = 0.0;
                    for e in er.clone() {
                        let a = &mut alpha_b[(e - e0) * heads + i];
                        *a = (*a - max).exp();
                        z += *a;
                    }
                    for e in er.clone() {
                        let a = &mut alpha_b[(e - e0) * heads + i];
                        *a /= z;
                        let slot = inc.slot[e] as usize;
                        let s = inc.src[e] as usize;
                        for (o, x) in out_row[cols.clone()]
                            .iter_mut()
                            .zip(&mw[slot].row(s)[cols.clone()])
                        {
                            *o += *a * x;
                        }
                    }
                }
            }
            (agg_b, alpha_b, raw_b)
        });
        let mut ag = Matrix::zeros(0, hid);
        for (a, al, r) in blocks {
            ag.data.extend(a);
            alpha[t].extend(al);
            raw[t].extend(r);
        }
        ag.rows = n;
        let mut g = ag.clone();
        g.data.iter_mut().for_each(|x| *x = gelu(*x));
        let upd = p.a[t].forward(&g);
        for v in 0..n {
            if !inc.range(v).is_empty() {
                out[t]
                    .row_mut(v)
                    .iter_mut()
                    .zip(upd.row(v))
                    .for_each(|(o, u)| *o += u);
            }
        }
        agg[t] = ag;
        act[t] = g;
    }
    let cache = LayerCache {
        h: h.to_vec(),
        k,
        q,
        m,
        kw,
        mw,
        alpha,
        raw,
        agg,
        act,
    };
    (out, cache)
}

/// Backward through one layer: accumulates parameter gradients into `g`
/// and returns the gradient with respect to the layer input.
pub fn hgt_layer_backward(
    p: &HgtLayer,
    g: &mut HgtLayer,
    shape: &HgtShape,
    topo: &Topology,
    c: &LayerCache,
    dout: &[Matrix],
) -> Vec<Matrix> {
    let (hid, heads, d) = (shape.hidden, shape.heads, shape.head_dim());
    let scale = 1.0 / (d as f64).sqrt();
    let (need_src, need_dst) = needs(topo);
    let mut dh: Vec<Matrix> = dout.to_vec();
    let mut dk: Vec<Matrix> = (0..NodeType::COUNT)
        .map(|t| {
            if need_src[t] {
                c.h[t].zeros_like()
            } else {
                empty(hid)
            }
        })
        .collect();
    let mut dm = dk.clone();
    let mut dq: Vec<Matrix> = (0..NodeType::COUNT)
        .map(|t| {
            if need_dst[t] {
                c.h[t].zeros_like()
            } else {
                empty(hid)
            }
        })
        .collect();
    let mut dkw: Vec<Matrix> = c.kw.iter().map(Matrix::zeros_like).collect();
    let mut dmw: Vec<Matrix> = c.mw.iter().map(Matrix::zeros_like).collect();

    for t in 0..NodeType::COUNT {
        if !need_dst[t] {
            continue;
        }
        let inc = &topo.incoming[t];
        let n = c.h[t].rows;
        let mut du = dout[t].clone();
        for v in 0..n {
            if inc.range(v).is_empty() {
                du.row_mut(v).fill(0.0);
            }
        }
        p.a[t].accumulate(&mut g.a[t], &c.act[t], &du);
        let mut dagg = Matrix::zeros(n, hid);
        add_a_bt(&mut dagg, &du, &p.a[t].w);
        dagg.data
            .iter_mut()
            .zip(&c.agg[t].data)
            .for_each(|(x, a)| *x *= gelu_grad(*a));

        let alpha = &c.alpha[t];
        let raw = &c.raw[t];
        let mut dalpha = vec![0.0; heads];
        for v in 0..n {
            let er = inc.range(v);
            if er.is_empty() {
                continue;
            }
            let dv = dagg.row(v);
            for i in 0..heads {
                let cols = i * d..(i + 1) * d;
                let mut sum = 0.0;
                let base = er.start;
                dalpha.resize(er.len(), 0.0);
                for e in er.clone() {
                    let slot = inc.slot[e] as usize;
                    let s = inc.src[e] as usize;
                    let da = dot(&dv[cols.clone()], &c.mw[slot].row(s)[cols.clone()]);
                    dalpha[e - base] = da;
                    sum += alpha[e * heads + i] * da;
                    let a = alpha[e * heads + i];
                    for (o, x) in dmw[slot].row_mut(s)[cols.clone()]
                        .iter_mut()
                        .zip(&dv[cols.clone()])
                    {
                        *o += a * x;
                    }
                }
                for e in er.clone() {
                    let slot = inc.slot[e] as usize;
                    let s = inc.src[e] as usize;
                    let a = alpha[e * heads + i];
                    let dlogit = a * (dalpha[e - base] - sum);
                    g.mu.data[slot] += dlogit * raw[e * heads + i] * scale;
                    let draw = dlogit * p.mu.data[slot] * scale;
                    let qv = &c.q[t].row(v)[cols.clone()];
                    for (o, x) in dkw[slot].row_mut(s)[cols.clone()].iter_mut().zip(qv) {
                        *o += draw * x;
                    }
                    let kws = &c.kw[slot].row(s)[cols.clone()];
                    for (o, x) in dq[t].row_mut(v)[cols.clone()].iter_mut().zip(kws) {
                        *o += draw * x;
                    }
                }
            }
        }
    }

    for (slot, (r, es)) in topo.relations.iter().zip(&topo.edges).enumerate() {
        if es.is_empty() {
            continue;
        }
        let s = r.src().index();
        for i in 0..heads {
            let cols = i * d;
            gemm(
                1.0,
                c.k[s].view().cols(cols, d).t(),
                dkw[slot].view().cols(cols, d),
                1.0,
                g.att[slot][i].view_mut(),
            );
            gemm(
                1.0,
                c.m[s].view().cols(cols, d).t(),
                dmw[slot].view().cols(cols, d),
                1.0,
                g.msg[slot][i].view_mut(),
            );
            gemm(
                1.0,
                dkw[slot].view().cols(cols, d),
                p.att[slot][i].view().t(),
                1.0,
                dk[s].view_mut().cols(cols, d),
            );
            gemm(
                1.0,
                dmw[slot].view().cols(cols, d),
                p.msg[slot][i].view().t(),
                1.0,
                dm[s].view_mut().cols(cols, d),
            );
        }
    }

    for t in 0..NodeType::COUNT {
        for (need, lin, glin, dx) in [
            (need_src[t], &p.k[t], &mut g.k[t], &dk[t]),
            (need_src[t], &p.m[t], &mut g.m[t], &dm[t]),
            (need_dst[t], &p.q[t], &mut g.q[t], &dq[t]),
        ] {
            if need {
                lin.accumulate(glin, &c.h[t], dx);
                add_a_bt(&mut dh[t], dx, &lin.w);
            }
        }
    }
    dh
}

/// Input projection, all layers, and the output head at Document rows.
pub fn hgt_forward(
    p: &HgtParams,
    topo: &Topology,
    x: &[Matrix],
) -> Result<(Matrix, ForwardCache), ModelError> {
    check_shapes(p, topo, x)?;
    let hid = p.shape.hidden;
    let h0: Vec<Matrix> = NodeType::ALL
        .iter()
        .map(|t| {
            let f = &x[t.index()];
            if f.rows == 0 {
                empty(hid)
            } else {
                p.input[t.index()].forward(f)
            }
        })
        .collect();
    let mut h = h0.clone();
    let mut layers = Vec::with_capacity(p.layers.len());
    for layer in &p.layers {
        let (next, cache) = hgt_layer_forward(layer, &p.shape, topo, &h);
        layers.push(cache);
        h = next;
    }
    let doc = NodeType::Document.index();
    let pred = p.head.forward(&h[doc]);
    let doc_rows = (0..topo.count(NodeType::Document)).collect();
    Ok((
        pred,
        ForwardCache {
            h0,
            layers,
            out: h,
            doc_rows,
        },
    ))
}

/// Gradients of all parameters given `dpred` (Document rows × outputs).
pub fn hgt_backward(
    p: &HgtParams,
    topo: &Topology,
    x: &[Matrix],
    cache: &ForwardCache,
    dpred: &Matrix,
) -> HgtParams {
    let zero: Vec<Matrix> = cache.out.iter().map(Matrix::zeros_like).collect();
    hgt_backward_with(p, topo, x, cache, dpred, &zero)
}

/// As [`hgt_backward`], with an extra upstream gradient `dnodes` on the
/// final state of every node (per type).
pub fn hgt_backward_with(
    p: &HgtParams,
    topo: &Topology,
    x: &[Matrix],
    cache: &ForwardCache,
    dpred: &Matrix,
    dnodes: &[Matrix],
) -> HgtParams {
    let mut g = p.zeros_like();
    let doc = NodeType::Document.index();
    p.head.accumulate(&mut g.head, &cache.out[doc], dpred);
    let mut dh: Vec<Matrix> = dnodes.to_vec();
    add_a_bt(&mut dh[doc], dpred, &p.head.w);
    for (l, layer) in p.layers.iter().enumerate().rev() {
        dh = hgt_layer_backward(
            layer,
            &mut g.layers[l],
            &p.shape,
            topo,
            &cache.layers[l],
            &dh,
        );
    }
    for t in 0..NodeType::COUNT {
        if x[t].rows > 0 {
            p.input[t].accumulate(&mut g.input[t], &x[t], &dh[t]);
        }
    }
    g
}
