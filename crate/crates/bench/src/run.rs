//! One solver run from flat settings, shared by `solve` and `compare`.

use std::str::FromStr;

use anyhow::Result;
use flexa::baselines::{fista_solve, sparsa_solve, BaselineOptions};
use flexa::control::{EpsSchedule, Merit, SelectionRule, StepMode, TauInit, TauPolicy};
use flexa::solvers::{self, Algorithm, RunTrace, SolverConfig, Status};
use flexa::{ApproximationKind, ProblemInstance};

use crate::usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Scheme(Algorithm),
    Fista,
    Sparsa,
}

impl Algo {
    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Scheme(a) => a.as_str(),
            Algo::Fista => "fista",
            Algo::Sparsa => "sparsa",
        }
    }

    pub fn uses_selection(self) -> bool {
        matches!(self, Algo::Scheme(Algorithm::Flexa | Algorithm::GjSelection))
    }
}

impl FromStr for Algo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fista" => Ok(Algo::Fista),
            "sparsa" => Ok(Algo::Sparsa),
            _ => Algorithm::from_str(s)
                .map(Algo::Scheme)
                .map_err(|_| format!("unknown algorithm `{s}` (flexa, gj, gjs, fista, sparsa)")),
        }
    }
}

/// Tuning knobs of the parallel schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub kind: ApproximationKind,
    pub gamma0: f64,
    pub theta: f64,
    pub step_mode: StepMode,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `None` for the trace rule.
    pub tau_init: Option<f64>,
    pub tau_max_updates: usize,
}

impl Default for Control {
    fn default() -> Self {
        let cfg = SolverConfig::default();
        Self {
            kind: cfg.kind,
            gamma0: cfg.gamma0,
            theta: cfg.theta,
            step_mode: cfg.step_mode,
            alpha1: cfg.eps.alpha1,
            alpha2: cfg.eps.alpha2,
            tau_init: None,
            tau_max_updates: cfg.tau.max_updates,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub algo: Algo,
    pub selection: SelectionRule,
    pub workers: usize,
    pub tol: f64,
    pub merit: Merit,
    pub max_iters: usize,
    pub seed: u64,
    pub time_limit: Option<f64>,
    pub record_wall_time: bool,
    pub control: Control,
}

impl RunSettings {
    pub fn new(algo: Algo, merit: Merit) -> Self {
        Self {
            algo,
            selection: SelectionRule::Threshold(0.5),
            workers: 1,
            tol: 1e-6,
            merit,
            max_iters: 10_000,
            seed: 0,
            time_limit: None,
            record_wall_time: true,
            control: Control::default(),
        }
    }

    pub fn solver_config(&self, algorithm: Algorithm) -> SolverConfig {
        let c = &self.control;
        let mut tau = TauPolicy {
            max_updates: c.tau_max_updates,
            ..TauPolicy::default()
        };
        if let Some(t) = c.tau_init {
            tau.init = TauInit::Explicit(vec![t]);
        }
        SolverConfig {
            algorithm,
            kind: c.kind,
            selection: self.selection,
            step_mode: c.step_mode,
            gamma0: c.gamma0,
            theta: c.theta,
            eps: EpsSchedule {
                alpha1: c.alpha1,
                alpha2: c.alpha2,
            },
            tau,
            workers: self.workers,
            max_iters: self.max_iters,
            merit: self.merit,
            tol: self.tol,
            seed: self.seed,
            time_limit: self.time_limit,
            record_wall_time: self.record_wall_time,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub iterations: usize,
    pub v: f64,
    pub merit: f64,
    pub trace: RunTrace,
}

impl RunOutcome {
    pub fn wall_seconds(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.wall_seconds)
    }

    /// `status iters wall_s V merit`
    pub fn summary(&self) -> String {
        format!(
            "{} {} {:.6} {} {}",
            self.status,
            self.iterations,
            self.wall_seconds(),
            solvers::fmt_g17(self.v),
            solvers::fmt_g17(self.merit)
        )
    }
}

/// Checks settings against the instance, reporting problems as usage errors.
pub fn check(p: &ProblemInstance, s: &RunSettings) -> Result<()> {
    if s.merit == Merit::Re && p.known_optimum.is_none() {
        return usage("merit `re` needs an instance with a known optimum (use zinf or zbar)");
    }
    if s.workers == 0 {
        return usage("--workers must be at least 1");
    }
    if let Err(e) = s.selection.validate() {
        return usage(e.to_string());
    }
    Ok(())
}

pub fn execute(p: &ProblemInstance, s: &RunSettings) -> Result<RunOutcome> {
    check(p, s)?;
    match s.algo {
        Algo::Scheme(a) => {
            let cfg = s.solver_config(a);
            if let Err(e) = cfg.validate(p) {
                return usage(e.to_string());
            }
            let r = solvers::solve(p, &cfg)?;
            Ok(RunOutcome {
                status: r.status,
                iterations: r.iterations,
                v: r.v,
                merit: r.merit,
                trace: r.trace,
            })
        }
        Algo::Fista | Algo::Sparsa => {
            let opts = BaselineOptions {
                merit: s.merit,
                tol: s.tol,
                max_iters: s.max_iters,
                time_limit: s.time_limit,
                force_nonconvex: true,
                record_wall_time: s.record_wall_time,
                x0: None,
            };
            let r = if s.algo == Algo::Fista {
                fista_solve(p, &opts)?
            } else {
                sparsa_solve(p, &opts)?
            };
            Ok(RunOutcome {
                status: r.status,
                iterations: r.iterations,
                v: r.v,
                merit: r.merit,
                trace: r.trace,
            })
        }
    }
}
