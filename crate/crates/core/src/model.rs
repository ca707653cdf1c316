//! The composite problem `V(x) = F(x) + G(x)` over a box: block structure,
//! feasible set, smooth oracle and separable regularizer.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{finite, Error, Result};
use crate::linalg;

/// Tolerance on the stationarity residual of a carried optimum.
pub const KNOWN_OPTIMUM_TOL: f64 = 1e-8;

/// Partition of `n` coordinates into `N` contiguous blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockStructure {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    dim: usize,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one block is required".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("block {i} is empty")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &s in &sizes {
            offsets.push(acc);
            acc += s;
        }
        Ok(Self {
            sizes,
            offsets,
            dim: acc,
        })
    }

    /// One coordinate per block.
    pub fn scalar(n: usize) -> Self {
        Self::new(vec![1; n]).expect("n >= 1")
    }

    /// Blocks of `size` coordinates; the last block takes the remainder.
    pub fn uniform(n: usize, size: usize) -> Result<Self> {
        if size == 0 || n == 0 {
            return Err(Error::InvalidArgument("block size and dimension must be positive".into()));
        }
        let mut sizes = vec![size; n / size];
        if n % size != 0 {
            sizes.push(n % size);
        }
        Self::new(sizes)
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i] + self.sizes[i]
    }

    pub fn is_scalar(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    pub fn max_size(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }
}

/// Coordinate box `[lo_j, hi_j]`; infinite bounds mean unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FeasibleSet {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    /// `[-b, b]ⁿ`.
    pub fn symmetric_box(n: usize, b: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidArgument(format!("box half-width must be positive, got {b}")));
        }
        Self::new(vec![-b; n], vec![b; n])
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                what: "box upper bounds",
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h || *l == f64::INFINITY || *h == f64::NEG_INFINITY {
                return Err(Error::InvalidArgument(format!("empty interval [{l}, {h}] at coordinate {j}")));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_unbounded(&self) -> bool {
        self.lo.iter().all(|l| *l == f64::NEG_INFINITY) && self.hi.iter().all(|h| *h == f64::INFINITY)
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(j, x)| x.clamp(self.lo[j], self.hi[j]))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .enumerate()
                .all(|(j, v)| *v >= self.lo[j] - tol && *v <= self.hi[j] + tol)
    }

    /// Whether coordinate `j` sits on its upper (resp. lower) bound.
    pub(crate) fn at_upper(&self, j: usize, v: f64) -> bool {
        let h = self.hi[j];
        h.is_finite() && v >= h - BOUND_TOL * h.abs().max(1.0)
    }

    pub(crate) fn at_lower(&self, j: usize, v: f64) -> bool {
        let l = self.lo[j];
        l.is_finite() && v <= l + BOUND_TOL * l.abs().max(1.0)
    }
}

/// Relative distance at which a coordinate counts as sitting on a bound.
pub const BOUND_TOL: f64 = 1e-9;

/// `F` restricted to one block with every other block frozen.
pub trait BlockFunction {
    fn dim(&self) -> usize;
    /// Value up to an additive constant.
    fn value(&self, t: &[f64]) -> f64;
    fn gradient(&self, t: &[f64], out: &mut [f64]);
    /// Upper bound on the curvature over the block.
    fn smoothness(&self) -> f64;
    /// Lower bound on the curvature over the block; negative when nonconvex.
    fn convexity(&self) -> f64;
}

/// Smooth part `F` of the objective.
///
/// The `*_state` methods work on a backend-specific cache (residual `Ax - b`
/// for least squares, signed margins for logistic loss) that the solvers keep
/// next to the iterate. Implementations must be re-entrant: the solvers call
/// them concurrently from several workers.
pub trait SmoothOracle: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Short backend name, e.g. `lasso`.
    fn name(&self) -> &'static str;

    fn eval_f(&self, x: &[f64]) -> f64 {
        let state = self.init_state(x);
        self.eval_f_state(x, &state)
    }

    fn full_grad(&self, x: &[f64]) -> Vec<f64> {
        let state = self.init_state(x);
        self.grad_block_state(x, &state, 0..self.dim())
    }

    fn grad_block(&self, x: &[f64], range: Range<usize>) -> Vec<f64> {
        let state = self.init_state(x);
        self.grad_block_state(x, &state, range)
    }

    /// Diagonal of `∇²F` on the block, when the backend can provide it.
    fn curvature_block(&self, x: &[f64], range: Range<usize>) -> Option<Vec<f64>> {
        let state = self.init_state(x);
        self.curvature_block_state(x, &state, range)
    }

    /// Global Lipschitz constant of `∇F`, when cheaply known.
    fn lipschitz_estimate(&self) -> Option<f64> {
        None
    }

    fn state_len(&self) -> usize;
    fn init_state(&self, x: &[f64]) -> Vec<f64>;
    fn eval_f_state(&self, x: &[f64], state: &[f64]) -> f64;
    fn grad_block_state(&self, x: &[f64], state: &[f64], range: Range<usize>) -> Vec<f64>;
    fn curvature_block_state(&self, x: &[f64], state: &[f64], range: Range<usize>) -> Option<Vec<f64>>;

    /// Updates the cache for `x[range] += delta`.
    fn apply_block_delta(&self, state: &mut [f64], range: Range<usize>, delta: &[f64]);

    /// Updates the cache for `x += delta` (full-length, mostly zero).
    fn apply_delta(&self, state: &mut [f64], delta: &[f64]);

    /// `F(·, x_{-i})` on the block at `range`.
    fn exact_block<'a>(&'a self, x: &'a [f64], state: &'a [f64], range: Range<usize>) -> Box<dyn BlockFunction + 'a>;

    /// True when `F(·, x_{-i})` on a block of this length is a quadratic with
    /// diagonal Hessian equal to [`SmoothOracle::curvature_block_state`].
    fn exact_block_is_diagonal_quadratic(&self, len: usize) -> bool;

    /// Lower bound on the Hessian diagonal valid at every point.
    fn curvature_floor(&self, range: Range<usize>) -> Vec<f64>;

    /// Lower bound on the smallest eigenvalue of `∇²F` restricted to any block.
    fn hessian_lower_bound(&self) -> f64;

    /// `tr(MᵀM) / 2n` for the data matrix `M`.
    fn trace_tau(&self) -> f64;

    fn flops_grad_block(&self, range: Range<usize>) -> f64;
    fn flops_apply_block(&self, range: Range<usize>) -> f64;
    fn flops_eval(&self) -> f64;
}

/// Kind of a block-separable regularizer `g_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegKind {
    /// `c‖x_i‖₁`
    L1(f64),
    /// `c‖x_i‖₂`
    GroupL2(f64),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer {
    pub kind: RegKind,
}

impl Regularizer {
    pub fn l1(c: f64) -> Self {
        Self { kind: RegKind::L1(c) }
    }

    pub fn group_l2(c: f64) -> Self {
        Self {
            kind: RegKind::GroupL2(c),
        }
    }

    pub fn zero() -> Self {
        Self { kind: RegKind::Zero }
    }

    pub fn weight(&self) -> f64 {
        match self.kind {
            RegKind::L1(c) | RegKind::GroupL2(c) => c,
            RegKind::Zero => 0.0,
        }
    }

    pub fn eval_block(&self, xi: &[f64]) -> f64 {
        match self.kind {
            RegKind::L1(c) => c * xi.iter().map(|v| v.abs()).sum::<f64>(),
            RegKind::GroupL2(c) => c * linalg::norm2(xi),
            RegKind::Zero => 0.0,
        }
    }

    /// `argmin_{t ∈ [lo, hi]} ½ Σ_j w_j (t_j − v_j)² + g(t)` for positive `w`.
    pub fn weighted_prox(&self, v: &[f64], w: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
        debug_assert!(w.iter().all(|&wj| wj > 0.0));
        match self.kind {
            RegKind::Zero => v
                .iter()
                .enumerate()
                .map(|(j, x)| x.clamp(lo[j], hi[j]))
                .collect(),
            RegKind::L1(c) => v
                .iter()
                .enumerate()
                .map(|(j, x)| soft_threshold(*x, c / w[j]).clamp(lo[j], hi[j]))
                .collect(),
            RegKind::GroupL2(c) => {
                debug_assert!(lo.iter().all(|l| l.is_infinite()) && hi.iter().all(|h| h.is_infinite()));
                group_weighted_prox(v, w, c)
            }
        }
    }
}

/// `sign(v) · max(|v| − λ, 0)`. The dead zone is closed: `|v| = λ` maps to 0.
pub fn soft_threshold(v: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0);
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// Weighted prox of `c‖·‖₂`. The minimizer is `t_j = w_j v_j s / (w_j s + c)`
/// with `s = ‖t‖` the root of `Σ_j (w_j v_j / (w_j s + c))² = 1`.
fn group_weighted_prox(v: &[f64], w: &[f64], c: f64) -> Vec<f64> {
    let wv: Vec<f64> = v.iter().zip(w).map(|(a, b)| a * b).collect();
    let wv_norm = linalg::norm2(&wv);
    if wv_norm <= c {
        return vec![0.0; v.len()];
    }
    if c == 0.0 {
        return v.to_vec();
    }
    if w.iter().all(|&x| x == w[0]) {
        // block soft-threshold
        let scale = 1.0 - c / wv_norm;
        return v.iter().map(|x| x * scale).collect();
    }
    let phi = |s: f64| -> f64 {
        wv.iter()
            .zip(w)
            .map(|(a, wj)| {
                let q = a / (wj * s + c);
                q * q
            })
            .sum::<f64>()
            - 1.0
    };
    // phi is decreasing in s; phi(0) > 0.
    let mut lo = 0.0;
    let mut hi = linalg::norm2(v).max(1.0);
    while phi(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    wv.iter().zip(w).map(|(a, wj)| a * s / (wj * s + c)).collect()
}

/// A carried optimal point and value, used by the relative-error merit.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// The full composite problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub oracle: Arc<dyn SmoothOracle>,
    pub reg: Regularizer,
    pub blocks: BlockStructure,
    pub feasible: FeasibleSet,
    pub known_optimum: Option<KnownOptimum>,
}

impl ProblemInstance {
    /// Validates dimensions, and the carried optimum if any.
    pub fn new(
        oracle: Arc<dyn SmoothOracle>,
        reg: Regularizer,
        blocks: BlockStructure,
        feasible: FeasibleSet,
        known_optimum: Option<KnownOptimum>,
    ) -> Result<Self> {
        let n = oracle.dim();
        for (what, got) in [("block structure", blocks.dim()), ("feasible set", feasible.dim())] {
            if got != n {
                return Err(Error::Dimension { what, expected: n, got });
            }
        }
        if let RegKind::GroupL2(_) = reg.kind {
            if !feasible.is_unbounded() {
                return Err(Error::Unsupported("group-l2 regularizer with box constraints".into()));
            }
        }
        if let RegKind::L1(c) | RegKind::GroupL2(c) = reg.kind {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("regularization weight must be finite and >= 0, got {c}")));
            }
        }
        let p = Self {
            oracle,
            reg,
            blocks,
            feasible,
            known_optimum: None,
        };
        if let Some(opt) = known_optimum {
            if opt.x.len() != n {
                return Err(Error::Dimension {
                    what: "known optimum",
                    expected: n,
                    got: opt.x.len(),
                });
            }
            let res = p.stationarity_residual(&opt.x)?;
            if res > KNOWN_OPTIMUM_TOL {
                return Err(Error::Data(format!("carried optimum is not stationary: residual {res:e}")));
            }
            return Ok(Self {
                known_optimum: Some(opt),
                ..p
            });
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.num_blocks()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                what: "point",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `G(x) = Σ_i g_i(x_i)`.
    pub fn eval_g(&self, x: &[f64]) -> f64 {
        (0..self.num_blocks())
            .map(|i| self.reg.eval_block(&x[self.blocks.range(i)]))
            .sum()
    }

    /// `V(x) = F(x) + G(x)`.
    pub fn eval_v(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let f = finite("F", self.oracle.eval_f(x))?;
        let g = finite("G", self.eval_g(x))?;
        finite("V", f + g)
    }

    /// `V` using a solver-maintained oracle cache.
    pub fn eval_v_state(&self, x: &[f64], state: &[f64]) -> Result<f64> {
        let f = finite("F", self.oracle.eval_f_state(x, state))?;
        let g = finite("G", self.eval_g(x))?;
        finite("V", f + g)
    }

    /// Prox of `g_i` plus the box on block `i` with per-coordinate weights.
    pub fn prox_block(&self, i: usize, v: &[f64], w: &[f64]) -> Vec<f64> {
        let r = self.blocks.range(i);
        self.reg
            .weighted_prox(v, w, &self.feasible.lower()[r.clone()], &self.feasible.upper()[r])
    }

    /// `‖Z̄(x)‖∞`, the stationarity measure used for termination. Zero exactly
    /// at stationary points.
    pub fn stationarity_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let grad = self.oracle.full_grad(x);
        self.residual_from_grad(x, &grad, true)
    }

    /// `‖Z(x)‖∞` without masking coordinates that push against an active bound.
    pub fn z_residual(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let grad = self.oracle.full_grad(x);
        self.residual_from_grad(x, &grad, false)
    }

    /// Residual from a precomputed gradient.
    pub fn residual_from_grad(&self, x: &[f64], grad: &[f64], mask_bounds: bool) -> Result<f64> {
        let mut worst = 0.0f64;
        match self.reg.kind {
            RegKind::L1(c) => {
                for (j, (&g, &xj)) in grad.iter().zip(x).enumerate() {
                    let z = g - (g - xj).clamp(-c, c);
                    let masked = mask_bounds
                        && ((z <= 0.0 && self.feasible.at_upper(j, xj))
                            || (z >= 0.0 && self.feasible.at_lower(j, xj)));
                    if !masked {
                        worst = worst.max(z.abs());
                    }
                }
            }
            RegKind::GroupL2(_) | RegKind::Zero => {
                for i in 0..self.num_blocks() {
                    let r = self.blocks.range(i);
                    let v: Vec<f64> = x[r.clone()].iter().zip(&grad[r.clone()]).map(|(a, b)| a - b).collect();
                    let p = self.prox_block(i, &v, &vec![1.0; v.len()]);
                    for (a, b) in x[r].iter().zip(&p) {
                        worst = worst.max((a - b).abs());
                    }
                }
            }
        }
        finite("stationarity residual", worst)
    }

    /// `(V − V*) / V*` against the carried optimum.
    pub fn relative_error(&self, v: f64) -> Result<f64> {
        let opt = self
            .known_optimum
            .as_ref()
            .ok_or_else(|| Error::Unsupported("relative error requires a known optimum".into()))?;
        crate::control::relative_error(v, opt.value)
    }
}
