//! Small random instances with naive reference evaluations, plus the
//! golden-section oracle. Everything here is recomputed from the raw data so
//! it does not share code paths with the library.
#![allow(dead_code)]

use flexa::linalg::{DenseMatrix, Matrix};
use flexa::problems::{LassoInstance, LogisticInstance, NcvxQpInstance};
use flexa::ProblemInstance;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Lasso,
    Logistic,
    Ncvx,
}

pub const BACKENDS: [Backend; 3] = [Backend::Lasso, Backend::Logistic, Backend::Ncvx];

/// Raw data of a small instance.
#[derive(Debug, Clone)]
pub struct Raw {
    pub backend: Backend,
    /// Rows of `A` (or of the label-free design `Y`).
    pub rows: Vec<Vec<f64>>,
    /// `b` or the labels.
    pub rhs: Vec<f64>,
    pub c: f64,
    pub cbar: f64,
    pub b_box: f64,
}

impl Raw {
    pub fn random(backend: Backend, m: usize, n: usize, seed: u64) -> Self {
        let mut r = rng(seed);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
        let rhs = match backend {
            Backend::Logistic => (0..m).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect(),
            _ => (0..m).map(|_| r.gen_range(-2.0..2.0)).collect(),
        };
        let c = r.gen_range(0.05..1.0);
        let (cbar, b_box) = match backend {
            Backend::Ncvx => (r.gen_range(0.5..3.0), r.gen_range(0.2..2.0)),
            _ => (0.0, f64::INFINITY),
        };
        Self {
            backend,
            rows,
            rhs,
            c,
            cbar,
            b_box,
        }
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn problem(&self) -> ProblemInstance {
        let a = Matrix::Dense(DenseMatrix::from_rows(&self.rows));
        match self.backend {
            Backend::Lasso => LassoInstance::new(a, self.rhs.clone(), self.c).unwrap().into_problem().unwrap(),
            Backend::Logistic => LogisticInstance::new(a, self.rhs.clone(), self.c).unwrap().into_problem().unwrap(),
            Backend::Ncvx => NcvxQpInstance::new(a, self.rhs.clone(), self.c, self.cbar, self.b_box)
                .unwrap()
                .into_problem()
                .unwrap(),
        }
    }

    fn row_dot(&self, j: usize, x: &[f64]) -> f64 {
        self.rows[j].iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Signed margin `a_j y_jᵀx` (logistic) or residual `a_jᵀx − b_j`.
    pub fn inner(&self, j: usize, x: &[f64]) -> f64 {
        match self.backend {
            Backend::Logistic => self.rhs[j] * self.row_dot(j, x),
            _ => self.row_dot(j, x) - self.rhs[j],
        }
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.m() {
            let u = self.inner(j, x);
            s += match self.backend {
                Backend::Logistic => softplus(-u),
                _ => u * u,
            };
        }
        if self.backend == Backend::Ncvx {
            s -= self.cbar * x.iter().map(|v| v * v).sum::<f64>();
        }
        s
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        self.c * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        self.f(x) + self.g(x)
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for j in 0..self.m() {
            let u = self.inner(j, x);
            let w = match self.backend {
                Backend::Logistic => -self.rhs[j] / (1.0 + u.exp()),
                _ => 2.0 * u,
            };
            for i in 0..n {
                out[i] += w * self.rows[j][i];
            }
        }
        if self.backend == Backend::Ncvx {
            for i in 0..n {
                out[i] -= 2.0 * self.cbar * x[i];
            }
        }
        out
    }

    /// `∂²F/∂x_i²`.
    pub fn hess_diag(&self, x: &[f64], i: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..self.m() {
            let a = self.rows[j][i];
            s += match self.backend {
                Backend::Logistic => {
                    let p = 1.0 / (1.0 + self.inner(j, x).exp());
                    a * a * p * (1.0 - p)
                }
                _ => 2.0 * a * a,
            };
        }
        if self.backend == Backend::Ncvx {
            s -= 2.0 * self.cbar;
        }
        s
    }

    pub fn bounds(&self) -> (f64, f64) {
        (-self.b_box, self.b_box)
    }

    pub fn random_point(&self, r: &mut ChaCha8Rng, scale: f64) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        (0..self.n())
            .map(|_| {
                let v: f64 = r.gen_range(-scale..scale);
                if r.gen_bool(0.2) {
                    0.0
                } else {
                    v.clamp(lo, hi)
                }
            })
            .collect()
    }
}

pub fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// `softplus(−(u + δ)) − softplus(−u)`, accurate to relative rounding.
pub fn softplus_neg_diff(u: f64, delta: f64) -> f64 {
    let s = 1.0 / (1.0 + u.exp());
    (s * (-delta).exp_m1()).ln_1p()
}

/// `|p + s| − |p + r|` without cancelling against `|p|`.
pub fn abs_diff(p: f64, s: f64, r: f64) -> f64 {
    let (a, b) = (p + s, p + r);
    if a >= 0.0 && b >= 0.0 {
        s - r
    } else if a <= 0.0 && b <= 0.0 {
        r - s
    } else {
        a.abs() - b.abs()
    }
}

/// Golden-section search for the minimizer of a unimodal function on
/// `[lo, hi]`, driven by `less(a, b) ⇔ h(a) < h(b)`.
pub fn golden_section(mut lo: f64, mut hi: f64, less: impl Fn(f64, f64) -> bool) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    for _ in 0..400 {
        if hi - lo <= 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if less(a, b) {
            hi = b;
            b = a;
            a = hi - r * (hi - lo);
        } else {
            lo = a;
            a = b;
            b = lo + r * (hi - lo);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The endpoints are candidates too when the minimizer sits on the box.
    [lo, mid, hi]
        .into_iter()
        .reduce(|p, q| if less(q, p) { q } else { p })
        .unwrap()
}

/// Largest eigenvalue of `AᵀA` by plain power iteration on dense rows.
pub fn power_iteration_gram(rows: &[Vec<f64>], iters: usize) -> f64 {
    let n = rows[0].len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..iters {
        let av: Vec<f64> = rows.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let mut w = vec![0.0; n];
        for (r, s) in rows.iter().zip(&av) {
            for i in 0..n {
                w[i] += r[i] * s;
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let next = norm;
        v = w.iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-14 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

pub fn dense_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.rows()).map(|i| a.row_dense(i)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
