use std::ops::Range;

use crate::linalg::{self, Matrix};
use crate::model::{BlockFunction, SmoothOracle};

/// `log(1 + e^{−u})` without overflow.
pub fn softplus_neg(u: f64) -> f64 {
    if u >= 0.0 {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

/// `1 / (1 + e^{u})` without overflow.
pub fn sigmoid_neg(u: f64) -> f64 {
    if u >= 0.0 {
        let e = (-u).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + u.exp())
    }
}

/// `F(x) = Σ_j log(1 + exp(−a_j y_jᵀx))`.
///
/// The oracle works with the label-signed design `Ŷ = diag(a) Y`, so the
/// margins are `u = Ŷx`. Cache layout: `[u (m entries), p (m entries)]` with
/// `p_j = 1/(1 + e^{u_j})`.
#[derive(Debug)]
pub struct LogisticLoss {
    signed: Matrix,
    col_sq_norms: Vec<f64>,
}

impl LogisticLoss {
    /// `signed` must already carry the labels on its rows.
    pub fn from_signed(signed: Matrix) -> Self {
        let col_sq_norms = (0..signed.cols()).map(|j| signed.col_sq_norm(j)).collect();
        Self { signed, col_sq_norms }
    }

    pub fn signed_design(&self) -> &Matrix {
        &self.signed
    }

    fn rows(&self) -> usize {
        self.signed.rows()
    }

    fn refresh_probs(state: &mut [f64], m: usize) {
        let (u, p) = state.split_at_mut(m);
        for (pj, uj) in p.iter_mut().zip(u.iter()) {
            *pj = sigmoid_neg(*uj);
        }
    }
}

impl SmoothOracle for LogisticLoss {
    fn dim(&self) -> usize {
        self.signed.cols()
    }

    fn name(&self) -> &'static str {
        "logistic"
    }

    fn lipschitz_estimate(&self) -> Option<f64> {
        Some(0.25 * self.signed.gram_spectral_norm(1000, 1e-10))
    }

    fn state_len(&self) -> usize {
        2 * self.rows()
    }

    fn init_state(&self, x: &[f64]) -> Vec<f64> {
        let m = self.rows();
        let mut state = self.signed.matvec(x);
        state.resize(2 * m, 0.0);
        Self::refresh_probs(&mut state, m);
        state
    }

    fn eval_f_state(&self, _x: &[f64], state: &[f64]) -> f64 {
        let losses: Vec<f64> = state[..self.rows()].iter().map(|&u| softplus_neg(u)).collect();
        linalg::sum(&losses)
    }

    fn grad_block_state(&self, _x: &[f64], state: &[f64], range: Range<usize>) -> Vec<f64> {
        let p = &state[self.rows()..];
        debug_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        range.map(|j| -self.signed.col_dot(j, p)).collect()
    }

    fn curvature_block_state(&self, _x: &[f64], state: &[f64], range: Range<usize>) -> Option<Vec<f64>> {
        let p = &state[self.rows()..];
        let w: Vec<f64> = p.iter().map(|pj| pj * (1.0 - pj)).collect();
        Some(range.map(|j| self.signed.col_weighted_sq(j, &w)).collect())
    }

    fn apply_block_delta(&self, state: &mut [f64], range: Range<usize>, delta: &[f64]) {
        let m = self.rows();
        let mut touched = false;
        for (j, d) in range.zip(delta) {
            if *d != 0.0 {
                self.signed.col_axpy(j, *d, &mut state[..m]);
                touched = true;
            }
        }
        if touched {
            Self::refresh_probs(state, m);
        }
    }

    fn apply_delta(&self, state: &mut [f64], delta: &[f64]) {
        let m = self.rows();
        self.signed.add_matvec(delta, &mut state[..m]);
        Self::refresh_probs(state, m);
    }

    fn exact_block<'a>(&'a self, x: &'a [f64], state: &'a [f64], range: Range<usize>) -> Box<dyn BlockFunction + 'a> {
        let trace: f64 = self.col_sq_norms[range.clone()].iter().sum();
        Box::new(LogisticBlock {
            loss: self,
            anchor: &x[range.clone()],
            margins: &state[..self.rows()],
            range,
            smooth: 0.25 * trace,
        })
    }

    fn exact_block_is_diagonal_quadratic(&self, _len: usize) -> bool {
        false
    }

    fn curvature_floor(&self, range: Range<usize>) -> Vec<f64> {
        vec![0.0; range.len()]
    }

    fn hessian_lower_bound(&self) -> f64 {
        0.0
    }

    fn trace_tau(&self) -> f64 {
        linalg::sum(&self.col_sq_norms) / (2.0 * self.dim() as f64)
    }

    fn flops_grad_block(&self, range: Range<usize>) -> f64 {
        range.map(|j| 2.0 * self.signed.col_nnz(j) as f64).sum()
    }

    fn flops_apply_block(&self, range: Range<usize>) -> f64 {
        // axpy on the margins plus the probability refresh
        range.map(|j| 2.0 * self.signed.col_nnz(j) as f64).sum::<f64>() + 4.0 * self.rows() as f64
    }

    fn flops_eval(&self) -> f64 {
        4.0 * self.rows() as f64
    }
}

struct LogisticBlock<'a> {
    loss: &'a LogisticLoss,
    anchor: &'a [f64],
    margins: &'a [f64],
    range: Range<usize>,
    smooth: f64,
}

impl LogisticBlock<'_> {
    fn shifted_margins(&self, t: &[f64]) -> Vec<f64> {
        let mut u = self.margins.to_vec();
        for ((j, tj), xj) in self.range.clone().zip(t).zip(self.anchor) {
            let d = tj - xj;
            if d != 0.0 {
                self.loss.signed.col_axpy(j, d, &mut u);
            }
        }
        u
    }
}

impl BlockFunction for LogisticBlock<'_> {
    fn dim(&self) -> usize {
        self.range.len()
    }

    fn value(&self, t: &[f64]) -> f64 {
        let u = self.shifted_margins(t);
        let losses: Vec<f64> = u.iter().map(|&v| softplus_neg(v)).collect();
        linalg::sum(&losses)
    }

    fn gradient(&self, t: &[f64], out: &mut [f64]) {
        let p: Vec<f64> = self.shifted_margins(t).iter().map(|&v| sigmoid_neg(v)).collect();
        for (o, j) in out.iter_mut().zip(self.range.clone()) {
            *o = -self.loss.signed.col_dot(j, &p);
        }
    }

    fn smoothness(&self) -> f64 {
        self.smooth
    }

    fn convexity(&self) -> f64 {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_primitives_at_extreme_margins() {
        assert_eq!(softplus_neg(1e4), 0.0);
        assert!((softplus_neg(-1e4) - 1e4).abs() < 1e-9);
        assert!((softplus_neg(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(sigmoid_neg(1e4), 0.0);
        assert_eq!(sigmoid_neg(-1e4), 1.0);
        assert_eq!(sigmoid_neg(0.0), 0.5);
    }
}
