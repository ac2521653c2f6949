//! Two-layer (configurable) graph convolution baseline on the type-erased graph.

use rand::Rng;

use super::params::{Linear, Parameters};
use super::tensor::{add_a_bt, add_at_b, matmul, Matrix};
use super::topology::NormAdjacency;
use super::ModelError;

/// `h' = relu(Â h W)` per layer, then a linear head at Document rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams {
    pub layers: Vec<Matrix>,
    pub head: Linear,
}

impl GcnParams {
    pub fn init<R: Rng>(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        outputs: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..layers)
            .map(|l| Matrix::glorot(if l == 0 { input_dim } else { hidden }, hidden, rng))
            .collect();
        Self {
            layers,
            head: Linear::glorot(hidden, outputs, rng),
        }
    }
}

impl Parameters for GcnParams {
    fn tensors(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.layers.iter().collect();
        v.extend([&self.head.w, &self.head.b]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v: Vec<&mut Matrix> = self.layers.iter_mut().collect();
        v.extend([&mut self.head.w, &mut self.head.b]);
        v
    }

    fn names(&self) -> Vec<String> {
        let mut v: Vec<String> = (0..self.layers.len())
            .map(|i| format!("gcn{i}.w"))
            .collect();
        v.extend(["head.w".to_string(), "head.b".to_string()]);
        v
    }
}

#[derive(Debug, Clone)]
pub struct GcnCache {
    /// Layer inputs; `inputs[0]` is the feature matrix.
    inputs: Vec<Matrix>,
    /// Pre-activations `Â h W`.
    pre: Vec<Matrix>,
}

impl GcnCache {
    pub fn is_finite(&self) -> bool {
        self.inputs.iter().chain(&self.pre).all(Matrix::is_finite)
    }
}

pub fn gcn_forward(
    p: &GcnParams,
    adj: &NormAdjacency,
    x: &Matrix,
    doc_rows: &[usize],
) -> Result<(Matrix, GcnCache), ModelError> {
    if x.rows != adj.n {
        return Err(ModelError::ShapeMismatch(format!(
            "{} feature rows for {} nodes",
            x.rows, adj.n
        )));
    }
    if let Some(w) = p.layers.first() {
        if x.cols != w.rows {
            return Err(ModelError::ShapeMismatch(format!(
                "feature width {} vs {}",
                x.cols, w.rows
            )));
        }
    }
    let mut inputs = vec![x.clone()];
    let mut pre = Vec::with_capacity(p.layers.len());
    for w in &p.layers {
        let z = adj.apply(&matmul(inputs.last().unwrap(), w));
        let mut h = z.clone();
        h.data.iter_mut().for_each(|v| *v = v.max(0.0));
        pre.push(z);
        inputs.push(h);
    }
    let h = inputs.last().unwrap().gather_rows(doc_rows);
    let pred = p.head.forward(&h);
    Ok((pred, GcnCache { inputs, pre }))
}

pub fn gcn_backward(
    p: &GcnParams,
    adj: &NormAdjacency,
    cache: &GcnCache,
    doc_rows: &[usize],
    dpred: &Matrix,
) -> GcnParams {
    let mut g = p.zeros_like();
    let last = cache.inputs.last().unwrap();
    let hd = last.gather_rows(doc_rows);
    p.head.accumulate(&mut g.head, &hd, dpred);
    let mut dhd = Matrix::zeros(doc_rows.len(), last.cols);
    add_a_bt(&mut dhd, dpred, &p.head.w);
    let mut dh = last.zeros_like();
    for (i, &r) in doc_rows.iter().enumerate() {
        dh.row_mut(r)
            .iter_mut()
            .zip(dhd.row(i))
            .for_each(|(a, b)| *a += b);
    }
    for l in (0..p.layers.len()).rev() {
        let mut dz = dh;
        dz.data
            .iter_mut()
            .zip(&cache.pre[l].data)
            .for_each(|(d, z)| {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            });
        // Â is symmetric, so Âᵀ·dz = Â·dz.
        let dt = adj.apply(&dz);
        add_at_b(&mut g.layers[l], &cache.inputs[l], &dt);
        let mut dx = cache.inputs[l].zeros_like();
        add_a_bt(&mut dx, &dt, &p.layers[l]);
        dh = dx;
    }
    g
}
