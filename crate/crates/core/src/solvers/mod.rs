//! Outer algorithms: the flexible parallel scheme (Jacobi updates on a
//! greedily selected block set), its Gauss-Jacobi hybrid, and the hybrid with
//! selection. All three share one driver loop that owns the iterate, the
//! oracle cache, the proximal weights and the trace.

mod engine;
mod trace;

use std::fmt;
use std::str::FromStr;

use crate::control::{EpsSchedule, Merit, SelectionRule, StepMode, StepSchedule, TauPolicy};
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::subprob::{ApproximationKind, DEFAULT_Q_MIN};

pub use engine::IterateView;
pub use trace::{fmt_g17, RunTrace, TraceRecord, TRACE_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Flexa,
    GaussJacobi,
    GjSelection,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Flexa => "flexa",
            Algorithm::GaussJacobi => "gj",
            Algorithm::GjSelection => "gjs",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flexa" => Ok(Algorithm::Flexa),
            "gj" | "gauss_jacobi" => Ok(Algorithm::GaussJacobi),
            "gjs" | "gj_selection" => Ok(Algorithm::GjSelection),
            _ => Err(Error::InvalidArgument(format!("unknown algorithm `{s}`"))),
        }
    }
}

/// Every knob of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub kind: ApproximationKind,
    pub selection: SelectionRule,
    pub step_mode: StepMode,
    pub gamma0: f64,
    pub theta: f64,
    pub eps: EpsSchedule,
    pub tau: TauPolicy,
    pub workers: usize,
    /// Block lists `I_1, …, I_P` for the Gauss-Jacobi variants. Defaults to
    /// contiguous equal slices.
    pub partition: Option<Vec<Vec<usize>>>,
    pub max_iters: usize,
    pub merit: Merit,
    pub tol: f64,
    /// Recorded for reproducibility; the algorithms are deterministic.
    pub seed: u64,
    pub q_min: f64,
    pub inner_max_iters: usize,
    /// Full recomputation period of the oracle cache.
    pub refresh_every: usize,
    pub time_limit: Option<f64>,
    /// When false the trace stores 0 for `wall_seconds`, so repeated runs
    /// give byte-identical CSVs. The time limit still uses the real clock.
    pub record_wall_time: bool,
    /// Starting point, projected onto the box. Zero by default.
    pub x0: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Flexa,
            kind: ApproximationKind::ExactBlock,
            selection: SelectionRule::Threshold(0.5),
            step_mode: StepMode::MeritScaled,
            gamma0: 0.9,
            theta: 1e-7,
            eps: EpsSchedule::default(),
            tau: TauPolicy::default(),
            workers: 1,
            partition: None,
            max_iters: 10_000,
            merit: Merit::Re,
            tol: 1e-6,
            seed: 0,
            q_min: DEFAULT_Q_MIN,
            inner_max_iters: 10_000,
            refresh_every: 500,
            time_limit: None,
            record_wall_time: true,
            x0: None,
        }
    }
}

impl SolverConfig {
    pub fn step_schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.step_mode, self.gamma0, self.theta)
    }

    pub fn validate(&self, p: &ProblemInstance) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        self.selection.validate()?;
        self.step_schedule()?;
        if !(self.eps.alpha1 > 0.0 && self.eps.alpha2 > 0.0) {
            return Err(Error::InvalidArgument("alpha1 and alpha2 must be positive".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.merit == Merit::Re && p.known_optimum.is_none() {
            return Err(Error::InvalidArgument("merit `re` needs an instance with a known optimum".into()));
        }
        if let Some(x0) = &self.x0 {
            if x0.len() != p.dim() {
                return Err(Error::Dimension {
                    what: "starting point",
                    expected: p.dim(),
                    got: x0.len(),
                });
            }
        }
        if self.refresh_every == 0 {
            return Err(Error::InvalidArgument("refresh_every must be >= 1".into()));
        }
        if let Some(part) = &self.partition {
            check_partition(part, p.num_blocks())?;
        }
        Ok(())
    }

    /// `I_1, …, I_P`, either the configured one or contiguous slices.
    pub fn resolved_partition(&self, num_blocks: usize) -> Vec<Vec<usize>> {
        if let Some(part) = &self.partition {
            return part.clone();
        }
        default_partition(num_blocks, self.workers)
    }
}

/// Contiguous slices whose sizes differ by at most one.
pub fn default_partition(num_blocks: usize, workers: usize) -> Vec<Vec<usize>> {
    let p = workers.clamp(1, num_blocks.max(1));
    let base = num_blocks / p;
    let extra = num_blocks % p;
    let mut out = Vec::with_capacity(p);
    let mut start = 0;
    for w in 0..p {
        let len = base + usize::from(w < extra);
        out.push((start..start + len).collect());
        start += len;
    }
    out
}

fn check_partition(part: &[Vec<usize>], num_blocks: usize) -> Result<()> {
    let mut seen = vec![false; num_blocks];
    for &i in part.iter().flatten() {
        if i >= num_blocks || seen[i] {
            return Err(Error::InvalidArgument(format!(
                "partition is not a disjoint cover of 0..{num_blocks} (block {i})"
            )));
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::InvalidArgument("partition does not cover every block".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Converged,
    MaxIters,
    TimeLimit,
    Failed(String),
}

impl Status {
    pub fn is_converged(&self) -> bool {
        *self == Status::Converged
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => f.write_str("converged"),
            Status::MaxIters => f.write_str("max_iters"),
            Status::TimeLimit => f.write_str("time_limit"),
            Status::Failed(_) => f.write_str("failed"),
        }
    }
}

/// Checks of the convergence-theorem hypotheses made along a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HypothesisLog {
    /// Iterations with `γ^k ∉ (0, 1]`.
    pub gamma_violations: usize,
    /// Block solves with `ε_i^k > γ^k α₁ α₂`.
    pub eps_violations: usize,
    /// Block solves whose inner loop could not certify `ε_i^k`.
    pub uncertified_solves: usize,
    pub tau_updates: usize,
    /// Blocks whose `τ_i` was raised to keep the subproblem strongly convex.
    pub tau_raised: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub v: f64,
    pub merit: f64,
    pub trace: RunTrace,
    pub status: Status,
    pub log: HypothesisLog,
    /// Outer iterations performed, discarded ones included.
    pub iterations: usize,
    pub accepted: usize,
}

/// Jacobi best responses on the selected blocks.
pub fn flexa_solve(p: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_observed(p, &SolverConfig { algorithm: Algorithm::Flexa, ..cfg.clone() }, &mut |_| {})
}

/// Each worker sweeps its blocks Gauss-Seidel style.
pub fn gauss_jacobi_solve(p: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_observed(p, &SolverConfig { algorithm: Algorithm::GaussJacobi, ..cfg.clone() }, &mut |_| {})
}

/// Gauss-Jacobi sweeps restricted to the selected blocks.
pub fn gj_selection_solve(p: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_observed(p, &SolverConfig { algorithm: Algorithm::GjSelection, ..cfg.clone() }, &mut |_| {})
}

/// Dispatches on `cfg.algorithm`.
pub fn solve(p: &ProblemInstance, cfg: &SolverConfig) -> Result<SolveResult> {
    solve_observed(p, cfg, &mut |_| {})
}

/// As [`solve`], calling `observer` once per trace row with the point it
/// describes.
pub fn solve_observed(p: &ProblemInstance, cfg: &SolverConfig, observer: &mut dyn FnMut(&IterateView)) -> Result<SolveResult> {
    cfg.validate(p)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build worker pool: {e}")))?;
    engine::run(p, cfg, &pool, observer)
}
