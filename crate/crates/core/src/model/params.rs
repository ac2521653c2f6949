use rand::Rng;

use super::Matrix;

/// Affine map `x·w + b` with `w: in × out`, `b: 1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Matrix,
    pub b: Matrix,
}

impl Linear {
    pub fn glorot<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            w: Matrix::glorot(input, output, rng),
            b: Matrix::zeros(1, output),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Matrix {
        let mut y = super::tensor::matmul(x, &self.w);
        y.add_row(&self.b);
        y
    }

    /// Accumulates weight and bias gradients; returns nothing for the input.
    pub fn accumulate(&self, grad: &mut Linear, x: &Matrix, dy: &Matrix) {
        super::tensor::add_at_b(&mut grad.w, x, dy);
        dy.col_sums_into(&mut grad.b);
    }
}

/// Uniform access to a model's tensors, in a fixed order.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<&Matrix>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix>;
    fn names(&self) -> Vec<String>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

/// Adam without weight decay.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new<P: Parameters>(params: &P, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let z: Vec<Matrix> = params.tensors().iter().map(|t| t.zeros_like()).collect();
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: z.clone(),
            v: z,
        }
    }

    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = self.beta1 * m.data[i] + (1.0 - self.beta1) * gi;
                v.data[i] = self.beta2 * v.data[i] + (1.0 - self.beta2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}
