//! Row-major `f64` matrices and a strided dgemm wrapper.

use rand::Rng;

use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    /// Glorot-uniform: `U(±sqrt(6 / (rows + cols)))`.
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self { rows, cols, data }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Rows selected by `idx`, in order.
    pub fn gather_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (o, &i) in idx.iter().enumerate() {
            out.row_mut(o).copy_from_slice(self.row(i));
        }
        out
    }

    /// Adds the broadcast row vector `bias` (1 × cols) to every row.
    pub fn add_row(&mut self, bias: &Matrix) {
        assert_eq!(bias.len(), self.cols);
        for r in self.data.chunks_mut(self.cols.max(1)) {
            r.iter_mut().zip(&bias.data).for_each(|(a, b)| *a += b);
        }
    }

    /// Column sums accumulated into `out` (1 × cols).
    pub fn col_sums_into(&self, out: &mut Matrix) {
        assert_eq!(out.len(), self.cols);
        for r in self.data.chunks(self.cols.max(1)) {
            out.data.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
    }

    pub fn view(&self) -> View<'_> {
        View {
            data: &self.data,
            offset: 0,
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }

    pub fn view_mut(&mut self) -> ViewMut<'_> {
        ViewMut {
            rows: self.rows,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
            offset: 0,
            data: &mut self.data,
        }
    }
}

/// Read-only strided view.
#[derive(Debug, Clone, Copy)]
pub struct View<'a> {
    data: &'a [f64],
    offset: usize,
    pub rows: usize,
    pub cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> View<'a> {
    pub fn t(self) -> View<'a> {
        View {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }

    /// Columns `c0..c0 + width`.
    pub fn cols(self, c0: usize, width: usize) -> View<'a> {
        assert!(c0 + width <= self.cols);
        View {
            offset: self.offset + (c0 as isize * self.cs) as usize,
            cols: width,
            ..self
        }
    }

    fn contiguous_rows(&self) -> bool {
        self.cs == 1 && self.rs == self.cols as isize
    }
}

/// Mutable strided view.
#[derive(Debug)]
pub struct ViewMut<'a> {
    data: &'a mut [f64],
    offset: usize,
    pub rows: usize,
    pub cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> ViewMut<'a> {
    pub fn cols(self, c0: usize, width: usize) -> ViewMut<'a> {
        assert!(c0 + width <= self.cols);
        ViewMut {
            offset: self.offset + (c0 as isize * self.cs) as usize,
            cols: width,
            ..self
        }
    }
}

fn check_bounds(len: usize, offset: usize, rows: usize, cols: usize, rs: isize, cs: isize) {
    if rows == 0 || cols == 0 {
        return;
    }
    assert!(rs >= 0 && cs >= 0);
    let last = offset + (rows - 1) * rs as usize + (cols - 1) * cs as usize;
    assert!(last < len, "view out of bounds");
}

fn dgemm_raw(alpha: f64, a: &View, b: &View, beta: f64, c: &mut ViewMut) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "gemm output shape");
    check_bounds(a.data.len(), a.offset, a.rows, a.cols, a.rs, a.cs);
    check_bounds(b.data.len(), b.offset, b.rows, b.cols, b.rs, b.cs);
    check_bounds(c.data.len(), c.offset, c.rows, c.cols, c.rs, c.cs);
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    // SAFETY: all three views were bounds-checked above and `c` is a unique
    // borrow, so the kernel only touches memory the slices own.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs,
            a.cs,
            b.data.as_ptr().add(b.offset),
            b.rs,
            b.cs,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs,
            c.cs,
        );
    }
}

/// `c ← alpha·a·b + beta·c`.
///
/// When `a` is row-contiguous and `c` is a whole matrix, output rows are
/// computed in fixed [`par::CHUNK_ROWS`] blocks (in parallel when enabled);
/// each output element sees the same summation order either way.
pub fn gemm(alpha: f64, a: View, b: View, beta: f64, c: ViewMut) {
    let whole =
        c.offset == 0 && c.cs == 1 && c.rs == c.cols as isize && c.data.len() == c.rows * c.cols;
    if !(whole && a.contiguous_rows()) || a.rows <= par::CHUNK_ROWS || a.cols == 0 {
        let mut c = c;
        dgemm_raw(alpha, &a, &b, beta, &mut c);
        return;
    }
    let n = c.cols;
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "gemm output shape");
    par::for_each_chunk_mut(c.data, par::CHUNK_ROWS * n, |i, chunk| {
        let rows = chunk.len() / n;
        let a_part = View {
            offset: a.offset + i * par::CHUNK_ROWS * a.rs as usize,
            rows,
            ..a
        };
        let mut c_part = ViewMut {
            data: chunk,
            offset: 0,
            rows,
            cols: n,
            rs: n as isize,
            cs: 1,
        };
        dgemm_raw(alpha, &a_part, &b, beta, &mut c_part);
    });
}

/// `a·b` as a new matrix.
pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut c = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, a.view(), b.view(), 0.0, c.view_mut());
    c
}

/// `g += aᵀ·d` (weight gradient).
pub fn add_at_b(g: &mut Matrix, a: &Matrix, d: &Matrix) {
    gemm(1.0, a.view().t(), d.view(), 1.0, g.view_mut());
}

/// `da += d·wᵀ` (input gradient).
pub fn add_a_bt(da: &mut Matrix, d: &Matrix, w: &Matrix) {
    gemm(1.0, d.view(), w.view().t(), 1.0, da.view_mut());
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}
