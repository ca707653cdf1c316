//! Reference competitors: accelerated proximal gradient with backtracking
//! (FISTA) and spectral proximal gradient with a nonmonotone line search
//! (SpaRSA). Both write the same trace schema as the main solvers.

mod fista;
mod sparsa;

use std::time::Instant;

use crate::control::Merit;
use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::solvers::{RunTrace, Status, TraceRecord};

pub use fista::{fista_solve, FistaState, FISTA_ETA, FISTA_L0, FISTA_MAX_DOUBLINGS};
pub use sparsa::{sparsa_solve, SparsaParams, SparsaState};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOptions {
    pub merit: Merit,
    pub tol: f64,
    pub max_iters: usize,
    pub time_limit: Option<f64>,
    /// Run FISTA on a nonconvex `F` anyway (with a warning).
    pub force_nonconvex: bool,
    /// As [`crate::solvers::SolverConfig::record_wall_time`].
    pub record_wall_time: bool,
    pub x0: Option<Vec<f64>>,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            merit: Merit::Re,
            tol: 1e-6,
            max_iters: 10_000,
            time_limit: None,
            force_nonconvex: false,
            record_wall_time: true,
            x0: None,
        }
    }
}

impl BaselineOptions {
    pub fn new(merit: Merit, tol: f64, max_iters: usize) -> Self {
        Self {
            merit,
            tol,
            max_iters,
            ..Self::default()
        }
    }

    fn validate(&self, p: &ProblemInstance) -> Result<()> {
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
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub x: Vec<f64>,
    pub v: f64,
    pub merit: f64,
    pub trace: RunTrace,
    pub status: Status,
    pub iterations: usize,
}

/// `argmin_t ½ w‖t − v‖² + G(t)` over the box, block by block.
pub(crate) fn prox_full(p: &ProblemInstance, v: &[f64], w: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    for i in 0..p.num_blocks() {
        let r = p.blocks.range(i);
        let wi = vec![w; r.len()];
        out.extend(p.prox_block(i, &v[r], &wi));
    }
    out
}

/// Trace bookkeeping shared by both baselines.
pub(crate) struct Recorder<'a> {
    p: &'a ProblemInstance,
    opts: &'a BaselineOptions,
    start: Instant,
    pub trace: RunTrace,
    pub flops: f64,
}

impl<'a> Recorder<'a> {
    pub fn new(p: &'a ProblemInstance, opts: &'a BaselineOptions) -> Self {
        Self {
            p,
            opts,
            start: Instant::now(),
            trace: RunTrace::default(),
            flops: 0.0,
        }
    }

    pub fn grad_flops(&self) -> f64 {
        self.p.oracle.flops_grad_block(0..self.p.dim())
    }

    pub fn eval_flops(&self) -> f64 {
        self.p.oracle.flops_eval()
    }

    /// Merit at `x`; `grad` must be `∇F(x)` unless the merit ignores it.
    pub fn merit(&self, x: &[f64], v: f64, grad: Option<&[f64]>) -> Result<f64> {
        match grad {
            Some(g) => self.opts.merit.eval(self.p, x, v, g),
            None => self.opts.merit.eval(self.p, x, v, &[]),
        }
    }

    /// Records `x^k` and returns the stopping status, if any.
    pub fn row(&mut self, k: usize, v: f64, merit: f64, step: f64) -> Option<Status> {
        let wall = self.start.elapsed().as_secs_f64();
        self.trace.push(TraceRecord {
            k,
            wall_seconds: if self.opts.record_wall_time { wall } else { 0.0 },
            v,
            merit,
            selected: self.p.num_blocks(),
            gamma: step,
            tau_scale: 1.0,
            flops: self.flops,
            discarded: false,
        });
        if merit <= self.opts.tol {
            Some(Status::Converged)
        } else if k >= self.opts.max_iters {
            Some(Status::MaxIters)
        } else if self.opts.time_limit.is_some_and(|t| wall >= t) {
            Some(Status::TimeLimit)
        } else {
            None
        }
    }
}
