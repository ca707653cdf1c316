//! Block subproblems `h̃_i(t) = P_i(t; x) + τ_i/2 ‖t − x_i‖² + g_i(t)` over the
//! box, and their minimizers (the best-response map `x̂_i(x, τ_i)`).

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{BlockFunction, ProblemInstance};

/// Default floor on the subproblem strong-convexity constant.
pub const DEFAULT_Q_MIN: f64 = 1e-12;

/// Working-precision target used by the inner loop when `eps = 0`.
const INNER_EXACT_RTOL: f64 = 1e-13;

/// Choice of the surrogate `P_i` of `F` on block `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ApproximationKind {
    /// `∇_iF(x)ᵀ(t − x_i)`.
    Linearized,
    /// `F(t, x_{−i})`, the block restriction of `F` itself.
    ExactBlock,
    /// `∇_iF(x)ᵀ(t − x_i) + ½ (t − x_i)ᵀ diag(∇²_iF(x)) (t − x_i)`.
    SecondOrderDiag,
}

impl ApproximationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ApproximationKind::Linearized => "linearized",
            ApproximationKind::ExactBlock => "exact",
            ApproximationKind::SecondOrderDiag => "second_order",
        }
    }
}

impl std::str::FromStr for ApproximationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linearized" | "linear" => Ok(ApproximationKind::Linearized),
            "exact" | "exact_block" => Ok(ApproximationKind::ExactBlock),
            "second_order" | "second_order_diag" => Ok(ApproximationKind::SecondOrderDiag),
            _ => Err(Error::InvalidArgument(format!("unknown approximation kind `{s}`"))),
        }
    }
}

/// Limits for the inner accelerated proximal-gradient loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOptions {
    pub max_iters: usize,
    pub q_min: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            q_min: DEFAULT_Q_MIN,
        }
    }
}

/// Result of one block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockResponse {
    pub z: Vec<f64>,
    /// Certified upper bound on `‖z − x̂_i‖`; 0 on closed-form paths.
    pub achieved_eps: f64,
    /// False when the inner budget ran out before reaching the requested eps.
    pub certified: bool,
    pub inner_iters: usize,
    pub flops: f64,
}

/// True when `x̂_i` has a closed form for this kind and block.
pub fn has_closed_form(p: &ProblemInstance, kind: ApproximationKind, i: usize) -> bool {
    match kind {
        ApproximationKind::Linearized | ApproximationKind::SecondOrderDiag => true,
        ApproximationKind::ExactBlock => p.oracle.exact_block_is_diagonal_quadratic(p.blocks.sizes()[i]),
    }
}

fn model_diagonal(
    p: &ProblemInstance,
    kind: ApproximationKind,
    x: &[f64],
    state: &[f64],
    range: Range<usize>,
    tau_i: f64,
) -> Result<Vec<f64>> {
    let diag = |what: &str| {
        p.oracle
            .curvature_block_state(x, state, range.clone())
            .ok_or_else(|| Error::Unsupported(format!("{what} needs curvature from the {} backend", p.oracle.name())))
    };
    Ok(match kind {
        ApproximationKind::Linearized => vec![tau_i; range.len()],
        ApproximationKind::SecondOrderDiag => diag("second-order model")?.into_iter().map(|d| d + tau_i).collect(),
        ApproximationKind::ExactBlock => {
            if p.oracle.exact_block_is_diagonal_quadratic(range.len()) {
                diag("exact block model")?.into_iter().map(|d| d + tau_i).collect()
            } else {
                let mu = p.oracle.exact_block(x, state, range.clone()).convexity() + tau_i;
                vec![mu; range.len()]
            }
        }
    })
}

/// Per-coordinate curvature (strong-convexity modulus) of `h̃_i` at `x`,
/// using a precomputed oracle cache.
pub fn subproblem_curvature_state(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    state: &[f64],
    tau_i: f64,
    q_min: f64,
) -> Result<Vec<f64>> {
    if !(tau_i >= 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be >= 0, got {tau_i}")));
    }
    let d = model_diagonal(p, kind, x, state, p.blocks.range(i), tau_i)?;
    if let Some(&bad) = d.iter().find(|&&v| !(v > q_min)) {
        return Err(Error::NotStronglyConvex {
            block: i,
            curvature: bad,
            floor: q_min,
        });
    }
    Ok(d)
}

/// Per-coordinate curvature of `h̃_i` at `x`. Fails when any entry is at or
/// below `q_min`.
pub fn subproblem_curvature(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    tau_i: f64,
    q_min: f64,
) -> Result<Vec<f64>> {
    let state = p.oracle.init_state(x);
    subproblem_curvature_state(p, kind, i, x, &state, tau_i, q_min)
}

/// Smallest `τ_i` for which the kind's curvature on block `i` stays above
/// `q_min` at every point.
pub fn min_tau(p: &ProblemInstance, kind: ApproximationKind, i: usize, q_min: f64) -> f64 {
    let range = p.blocks.range(i);
    let floor = match kind {
        ApproximationKind::Linearized => 0.0,
        ApproximationKind::SecondOrderDiag => p.oracle.curvature_floor(range).into_iter().fold(f64::INFINITY, f64::min),
        ApproximationKind::ExactBlock => {
            if p.oracle.exact_block_is_diagonal_quadratic(range.len()) {
                p.oracle.curvature_floor(range).into_iter().fold(f64::INFINITY, f64::min)
            } else {
                p.oracle.hessian_lower_bound()
            }
        }
    };
    (q_min - floor).max(0.0)
}

/// `x̂_i` for the kind, given the block gradient at `x`.
///
/// `eps_i` is the admissible distance to the exact minimizer; it only matters
/// on the iterative path.
#[allow(clippy::too_many_arguments)]
pub fn solve_block(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    state: &[f64],
    grad: &[f64],
    tau_i: f64,
    eps_i: f64,
    opts: &InnerOptions,
) -> Result<BlockResponse> {
    let range = p.blocks.range(i);
    let d = subproblem_curvature_state(p, kind, i, x, state, tau_i, opts.q_min)?;
    let xi = &x[range.clone()];
    if has_closed_form(p, kind, i) {
        let v: Vec<f64> = xi.iter().zip(grad).zip(&d).map(|((a, g), dj)| a - g / dj).collect();
        let z = p.prox_block(i, &v, &d);
        return Ok(BlockResponse {
            z,
            achieved_eps: 0.0,
            certified: true,
            inner_iters: 0,
            flops: 4.0 * range.len() as f64,
        });
    }
    let block = p.oracle.exact_block(x, state, range.clone());
    if range.len() == 1 {
        return Ok(inner_bracket(p, i, block.as_ref(), xi[0], tau_i, eps_i, opts, range));
    }
    let mu = d[0];
    Ok(inner_apg(p, i, block.as_ref(), xi, tau_i, mu, eps_i, opts, range))
}

/// Scalar blocks: bisection on the side indicated by a proximal gradient
/// step. For convex `φ` and `L` at least the Lipschitz constant of the smooth
/// part, the step from `t` never moves away from the minimizer, so the
/// bracket width certifies the distance without relying on `μ`.
#[allow(clippy::too_many_arguments)]
fn inner_bracket(
    p: &ProblemInstance,
    i: usize,
    block: &dyn BlockFunction,
    xi: f64,
    tau: f64,
    eps: f64,
    opts: &InnerOptions,
    range: Range<usize>,
) -> BlockResponse {
    let lip = block.smoothness() + tau;
    let per_iter = p.oracle.flops_grad_block(range.clone()) + p.oracle.flops_apply_block(range);
    let evals = std::cell::Cell::new(0usize);
    // Signed prox-gradient displacement at t: > 0 means the minimizer is to the right.
    let step = |t: f64| -> f64 {
        evals.set(evals.get() + 1);
        let mut g = [0.0];
        block.gradient(&[t], &mut g);
        let v = t - (g[0] + tau * (t - xi)) / lip;
        p.prox_block(i, &[v], &[lip])[0] - t
    };

    let d0 = step(xi);
    if d0 == 0.0 {
        return BlockResponse {
            z: vec![xi],
            achieved_eps: 0.0,
            certified: true,
            inner_iters: evals.get(),
            flops: per_iter * evals.get() as f64,
        };
    }
    // Expand from xi in the direction of the step until the sign flips.
    let dir = d0.signum();
    let mut near = xi;
    let mut width = d0.abs();
    let mut far = xi + d0;
    let mut hit = false;
    let mut bracketed = false;
    while evals.get() < opts.max_iters {
        let d = step(far);
        if d == 0.0 {
            hit = true;
            break;
        }
        if d.signum() != dir {
            bracketed = true;
            break;
        }
        near = far;
        width *= 2.0;
        let next = near + dir * width;
        if next == far || !next.is_finite() {
            break;
        }
        far = next;
    }
    if !(hit || bracketed) {
        return BlockResponse {
            z: vec![far],
            achieved_eps: f64::INFINITY,
            certified: false,
            inner_iters: evals.get(),
            flops: per_iter * evals.get() as f64,
        };
    }
    let (mut lo, mut hi) = if dir > 0.0 { (near, far) } else { (far, near) };
    if hit {
        lo = far;
        hi = far;
    }
    while hi - lo > 0.0 && evals.get() < opts.max_iters {
        let target = eps.max(INNER_EXACT_RTOL * (1.0 + lo.abs().max(hi.abs())));
        if 0.5 * (hi - lo) <= target {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        let d = step(mid);
        if d == 0.0 {
            lo = mid;
            hi = mid;
        } else if d > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = lo + 0.5 * (hi - lo);
    let cert = 0.5 * (hi - lo);
    BlockResponse {
        z: vec![z],
        achieved_eps: cert,
        certified: cert <= eps.max(INNER_EXACT_RTOL * (1.0 + z.abs())),
        inner_iters: evals.get(),
        flops: per_iter * evals.get() as f64,
    }
}

/// Accelerated proximal gradient on `φ(t) = f(t) + τ/2‖t − x_i‖² + g_i(t)`
/// with the certificate `dist(t⁺, x̂) ≤ ‖w‖/μ`, where
/// `w = ∇f(t⁺) − ∇f(y) + L(y − t⁺) ∈ ∂φ(t⁺)`.
#[allow(clippy::too_many_arguments)]
fn inner_apg(
    p: &ProblemInstance,
    i: usize,
    block: &dyn BlockFunction,
    xi: &[f64],
    tau: f64,
    mu: f64,
    eps: f64,
    opts: &InnerOptions,
    range: Range<usize>,
) -> BlockResponse {
    let n = xi.len();
    let lip = (block.smoothness() + tau).max(mu);
    let sq_l = lip.sqrt();
    let sq_mu = mu.sqrt();
    let beta = (sq_l - sq_mu) / (sq_l + sq_mu);
    let per_iter = 2.0 * (p.oracle.flops_grad_block(range.clone()) + p.oracle.flops_apply_block(range));

    let grad_phi = |t: &[f64], out: &mut [f64]| {
        block.gradient(t, out);
        for ((o, tj), xj) in out.iter_mut().zip(t).zip(xi) {
            *o += tau * (tj - xj);
        }
    };

    let w_l = vec![lip; n];
    let mut t = xi.to_vec();
    let mut y = t.clone();
    let mut gy = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut best = (f64::INFINITY, t.clone());
    let mut iters = 0;
    while iters < opts.max_iters {
        iters += 1;
        grad_phi(&y, &mut gy);
        let v: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect();
        let t_next = p.prox_block(i, &v, &w_l);
        grad_phi(&t_next, &mut gt);
        let w: Vec<f64> = (0..n).map(|j| gt[j] - gy[j] + lip * (y[j] - t_next[j])).collect();
        let cert = linalg::norm2(&w) / mu;
        if cert < best.0 {
            best = (cert, t_next.clone());
        }
        let target = eps.max(INNER_EXACT_RTOL * (1.0 + linalg::norm2(&t_next)));
        if cert <= target {
            break;
        }
        y = (0..n).map(|j| t_next[j] + beta * (t_next[j] - t[j])).collect();
        t = t_next;
    }
    let (cert, z) = best;
    let certified = cert <= eps.max(INNER_EXACT_RTOL * (1.0 + linalg::norm2(&z)));
    BlockResponse {
        z,
        achieved_eps: cert,
        certified,
        inner_iters: iters,
        flops: per_iter * iters as f64,
    }
}

/// `x̂_i(x, τ_i)` within `eps_i`.
pub fn best_response_block(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    tau_i: f64,
    eps_i: f64,
) -> Result<BlockResponse> {
    if eps_i < 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps_i}")));
    }
    let state = p.oracle.init_state(x);
    let grad = p.oracle.grad_block_state(x, &state, p.blocks.range(i));
    solve_block(p, kind, i, x, &state, &grad, tau_i, eps_i, &InnerOptions::default())
}

/// `x̂(x, τ)` over all blocks, evaluated concurrently. Returns the stacked
/// point and the per-block certified distances.
pub fn best_response_full(
    p: &ProblemInstance,
    kind: ApproximationKind,
    x: &[f64],
    tau: &[f64],
    eps: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let nb = p.num_blocks();
    for (what, got) in [("tau", tau.len()), ("eps", eps.len())] {
        if got != nb {
            return Err(Error::Dimension { what, expected: nb, got });
        }
    }
    let state = p.oracle.init_state(x);
    let opts = InnerOptions::default();
    let responses: Vec<Result<BlockResponse>> = (0..nb)
        .into_par_iter()
        .map(|i| {
            let grad = p.oracle.grad_block_state(x, &state, p.blocks.range(i));
            solve_block(p, kind, i, x, &state, &grad, tau[i], eps[i], &opts)
        })
        .collect();
    let mut z = Vec::with_capacity(x.len());
    let mut achieved = Vec::with_capacity(nb);
    for r in responses {
        let r = r?;
        z.extend_from_slice(&r.z);
        achieved.push(r.achieved_eps);
    }
    Ok((z, achieved))
}

/// Value of `h̃_i` at `t` (up to a constant), for oracles and tests.
pub fn subproblem_value(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    tau_i: f64,
    t: &[f64],
) -> Result<f64> {
    let range = p.blocks.range(i);
    let state = p.oracle.init_state(x);
    let xi = &x[range.clone()];
    let prox: f64 = t.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() * 0.5 * tau_i;
    let model = match kind {
        ApproximationKind::ExactBlock => {
            let block = p.oracle.exact_block(x, &state, range.clone());
            block.value(t) - block.value(xi)
        }
        ApproximationKind::Linearized | ApproximationKind::SecondOrderDiag => {
            let g = p.oracle.grad_block_state(x, &state, range.clone());
            let lin: f64 = g.iter().zip(t).zip(xi).map(|((g, a), b)| g * (a - b)).sum();
            if kind == ApproximationKind::Linearized {
                lin
            } else {
                let h = p
                    .oracle
                    .curvature_block_state(x, &state, range.clone())
                    .ok_or_else(|| Error::Unsupported("second-order model needs curvature".into()))?;
                lin + 0.5 * h.iter().zip(t).zip(xi).map(|((h, a), b)| h * (a - b) * (a - b)).sum::<f64>()
            }
        }
    };
    Ok(model + prox + p.reg.eval_block(t))
}
