use std::collections::HashMap;
use std::ops::Range;
use std::sync::{Mutex, OnceLock};

use crate::linalg::{self, Matrix};
use crate::model::{BlockFunction, SmoothOracle};

/// `F(x) = ‖Ax − b‖² − c̄‖x‖²`. With `c̄ = 0` this is the least-squares loss of
/// (group) LASSO; with `c̄ > 0` the loss of the nonconvex box QP.
///
/// Cache: the residual `r = Ax − b`.
#[derive(Debug)]
pub struct QuadraticLoss {
    a: Matrix,
    b: Vec<f64>,
    col_sq_norms: Vec<f64>,
    cbar: f64,
    lipschitz: OnceLock<f64>,
    /// Extreme eigenvalues of `2 A_Iᵀ A_I` per block range.
    block_spectra: Mutex<HashMap<(usize, usize), (f64, f64)>>,
}

/// Largest block for which the exact Gram spectrum is computed.
const MAX_SPECTRUM_BLOCK: usize = 64;

impl QuadraticLoss {
    pub fn new(a: Matrix, b: Vec<f64>, cbar: f64) -> Self {
        assert_eq!(a.rows(), b.len(), "rhs length");
        let col_sq_norms = (0..a.cols()).map(|j| a.col_sq_norm(j)).collect();
        Self {
            a,
            b,
            col_sq_norms,
            cbar,
            lipschitz: OnceLock::new(),
            block_spectra: Mutex::new(HashMap::new()),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn cbar(&self) -> f64 {
        self.cbar
    }

    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// `(λ_min, λ_max)` of `2 A_Iᵀ A_I`, widened by a rounding margin.
    fn block_spectrum(&self, range: Range<usize>) -> (f64, f64) {
        let key = (range.start, range.len());
        if let Some(v) = self.block_spectra.lock().unwrap().get(&key) {
            return *v;
        }
        let k = range.len();
        let cols: Vec<Vec<f64>> = range.clone().map(|j| self.a.col_dense(j)).collect();
        let gram = nalgebra::DMatrix::from_fn(k, k, |r, c| 2.0 * linalg::dot(&cols[r], &cols[c]));
        let eig = nalgebra::SymmetricEigen::new(gram).eigenvalues;
        let trace: f64 = 2.0 * self.col_sq_norms[range].iter().sum::<f64>();
        let margin = 1e-10 * trace;
        let lo = (eig.min() - margin).max(0.0);
        let hi = (eig.max() + margin).min(trace);
        self.block_spectra.lock().unwrap().insert(key, (lo, hi));
        (lo, hi)
    }

    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }
}

impl SmoothOracle for QuadraticLoss {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn name(&self) -> &'static str {
        if self.cbar == 0.0 {
            "least_squares"
        } else {
            "ncvx_quadratic"
        }
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.residual(x);
        let mut g = self.a.rmatvec(&r);
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj = 2.0 * *gj - 2.0 * self.cbar * xj;
        }
        g
    }

    fn lipschitz_estimate(&self) -> Option<f64> {
        // ‖∇²F‖ = max(2λ_max(AᵀA) − 2c̄, 2c̄)
        let l = *self
            .lipschitz
            .get_or_init(|| 2.0 * self.a.gram_spectral_norm(1000, 1e-10));
        Some((l - 2.0 * self.cbar).abs().max(2.0 * self.cbar))
    }

    fn state_len(&self) -> usize {
        self.a.rows()
    }

    fn init_state(&self, x: &[f64]) -> Vec<f64> {
        self.residual(x)
    }

    fn eval_f_state(&self, x: &[f64], state: &[f64]) -> f64 {
        let mut f = linalg::dot(state, state);
        if self.cbar != 0.0 {
            f -= self.cbar * linalg::dot(x, x);
        }
        f
    }

    fn grad_block_state(&self, x: &[f64], state: &[f64], range: Range<usize>) -> Vec<f64> {
        range
            .map(|j| 2.0 * self.a.col_dot(j, state) - 2.0 * self.cbar * x[j])
            .collect()
    }

    fn curvature_block_state(&self, _x: &[f64], _state: &[f64], range: Range<usize>) -> Option<Vec<f64>> {
        Some(self.curvature_floor(range))
    }

    fn apply_block_delta(&self, state: &mut [f64], range: Range<usize>, delta: &[f64]) {
        for (j, d) in range.zip(delta) {
            if *d != 0.0 {
                self.a.col_axpy(j, *d, state);
            }
        }
    }

    fn apply_delta(&self, state: &mut [f64], delta: &[f64]) {
        self.a.add_matvec(delta, state);
    }

    fn exact_block<'a>(&'a self, x: &'a [f64], state: &'a [f64], range: Range<usize>) -> Box<dyn BlockFunction + 'a> {
        let trace: f64 = self.col_sq_norms[range.clone()].iter().sum();
        let (smooth, convex) = if range.len() == 1 {
            let d = 2.0 * trace - 2.0 * self.cbar;
            (d, d)
        } else if range.len() <= MAX_SPECTRUM_BLOCK {
            let (lo, hi) = self.block_spectrum(range.clone());
            (hi - 2.0 * self.cbar, lo - 2.0 * self.cbar)
        } else {
            (2.0 * trace - 2.0 * self.cbar, -2.0 * self.cbar)
        };
        Box::new(QuadraticBlock {
            loss: self,
            anchor: &x[range.clone()],
            residual: state,
            range,
            smooth,
            convex,
        })
    }

    fn exact_block_is_diagonal_quadratic(&self, len: usize) -> bool {
        len == 1
    }

    fn curvature_floor(&self, range: Range<usize>) -> Vec<f64> {
        self.col_sq_norms[range]
            .iter()
            .map(|s| 2.0 * s - 2.0 * self.cbar)
            .collect()
    }

    fn hessian_lower_bound(&self) -> f64 {
        -2.0 * self.cbar
    }

    fn trace_tau(&self) -> f64 {
        linalg::sum(&self.col_sq_norms) / (2.0 * self.dim() as f64)
    }

    fn flops_grad_block(&self, range: Range<usize>) -> f64 {
        range.map(|j| 2.0 * self.a.col_nnz(j) as f64 + 2.0).sum()
    }

    fn flops_apply_block(&self, range: Range<usize>) -> f64 {
        range.map(|j| 2.0 * self.a.col_nnz(j) as f64).sum()
    }

    fn flops_eval(&self) -> f64 {
        2.0 * self.a.rows() as f64
    }
}

struct QuadraticBlock<'a> {
    loss: &'a QuadraticLoss,
    anchor: &'a [f64],
    residual: &'a [f64],
    range: Range<usize>,
    smooth: f64,
    convex: f64,
}

impl QuadraticBlock<'_> {
    /// `r + A_i (t − x_i)`.
    fn shifted_residual(&self, t: &[f64]) -> Vec<f64> {
        let mut w = self.residual.to_vec();
        for ((j, tj), xj) in self.range.clone().zip(t).zip(self.anchor) {
            let d = tj - xj;
            if d != 0.0 {
                self.loss.a.col_axpy(j, d, &mut w);
            }
        }
        w
    }
}

impl BlockFunction for QuadraticBlock<'_> {
    fn dim(&self) -> usize {
        self.range.len()
    }

    fn value(&self, t: &[f64]) -> f64 {
        let w = self.shifted_residual(t);
        linalg::dot(&w, &w) - self.loss.cbar * linalg::dot(t, t)
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let w = self.shifted_residual(t);
        for ((o, j), tj) in out.iter_mut().zip(self.range.clone()).zip(t) {
            *o = 2.0 * self.loss.a.col_dot(j, &w) - 2.0 * self.loss.cbar * tj;
        }
    }

    fn smoothness(&self) -> f64 {
        self.smooth
    }

    fn convexity(&self) -> f64 {
        self.convex
    }
}
