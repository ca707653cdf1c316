use std::time::Instant;

use rayon::prelude::*;

use super::{Algorithm, HypothesisLog, RunTrace, SolveResult, SolverConfig, Status, TraceRecord};
use crate::control::{self, Merit, SelectionRule, TauAction, TauCounters};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::subprob::{self, BlockResponse, InnerOptions};

/// What an observer sees for each trace row.
#[derive(Debug)]
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a [f64],
    pub v: f64,
    pub merit: f64,
    /// `x̂(x^k, τ)` when the algorithm computed every block's response at `x^k`.
    pub best_response: Option<&'a [f64]>,
    pub discarded: bool,
}

/// Moves proposed by one outer iteration.
struct Proposal {
    /// `x^{k+1} − x^k`, zero outside updated blocks.
    delta: Vec<f64>,
    selected: usize,
    flops: f64,
    best_response: Option<Vec<f64>>,
}

struct Solves {
    gamma_bound: f64,
    eps_violations: usize,
    uncertified: usize,
}

impl Solves {
    fn check(&mut self, eps: f64, r: &BlockResponse) {
        if eps > self.gamma_bound {
            self.eps_violations += 1;
        }
        if !r.certified {
            self.uncertified += 1;
        }
    }
}

struct Ctx<'a> {
    p: &'a ProblemInstance,
    cfg: &'a SolverConfig,
    opts: InnerOptions,
    partition: Vec<Vec<usize>>,
    pool: &'a rayon::ThreadPool,
}

impl Ctx<'_> {
    fn full_grad(&self, x: &[f64], state: &[f64]) -> (Vec<f64>, f64) {
        let p = self.p;
        let parts: Vec<Vec<f64>> = self.pool.install(|| {
            (0..p.num_blocks())
                .into_par_iter()
                .map(|i| p.oracle.grad_block_state(x, state, p.blocks.range(i)))
                .collect()
        });
        (parts.concat(), p.oracle.flops_grad_block(0..p.dim()))
    }

    fn eps_for(&self, gamma: f64, g: &[f64]) -> f64 {
        self.cfg.eps.eps(gamma, linalg::norm2(g))
    }

    /// Best responses of every block at `x` (Jacobi pass).
    fn jacobi_pass(
        &self,
        x: &[f64],
        state: &[f64],
        grad: &[f64],
        tau: &[f64],
        gamma: f64,
        solves: &mut Solves,
    ) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let p = self.p;
        let out: Vec<Result<(f64, BlockResponse)>> = self.pool.install(|| {
            (0..p.num_blocks())
                .into_par_iter()
                .map(|i| {
                    let r = p.blocks.range(i);
                    let eps = self.eps_for(gamma, &grad[r.clone()]);
                    let resp = subprob::solve_block(p, self.cfg.kind, i, x, state, &grad[r], tau[i], eps, &self.opts)?;
                    Ok((eps, resp))
                })
                .collect()
        });
        let mut z = Vec::with_capacity(x.len());
        let mut e = Vec::with_capacity(p.num_blocks());
        let mut flops = 0.0;
        for (i, o) in out.into_iter().enumerate() {
            let (eps, resp) = o?;
            solves.check(eps, &resp);
            let xi = &x[p.blocks.range(i)];
            let d: Vec<f64> = resp.z.iter().zip(xi).map(|(a, b)| a - b).collect();
            e.push(linalg::norm2(&d));
            flops += resp.flops;
            z.extend_from_slice(&resp.z);
        }
        Ok((z, e, flops))
    }

    fn flexa(&self, x: &[f64], state: &[f64], grad: &[f64], tau: &[f64], gamma: f64, solves: &mut Solves) -> Result<Proposal> {
        let p = self.p;
        let (z, e, flops) = self.jacobi_pass(x, state, grad, tau, gamma, solves)?;
        let sel = control::select(self.cfg.selection, &e);
        let mut delta = vec![0.0; x.len()];
        for &i in &sel.indices {
            for j in p.blocks.range(i) {
                delta[j] = gamma * (z[j] - x[j]);
            }
        }
        Ok(Proposal {
            delta,
            selected: sel.indices.len(),
            flops,
            best_response: Some(z),
        })
    }

    /// Gauss-Jacobi sweeps; `selected[i]` restricts the sweep when given.
    fn gauss_jacobi(
        &self,
        x: &[f64],
        state: &[f64],
        tau: &[f64],
        gamma: f64,
        selected: Option<&[bool]>,
        solves: &mut Solves,
    ) -> Result<(Vec<f64>, usize, f64)> {
        let p = self.p;
        let cfg = self.cfg;
        type Sweep = (Vec<(usize, Vec<f64>)>, Vec<f64>, usize, f64);
        let sweep = |blocks: &Vec<usize>| -> Result<Sweep> {
                let mut lx = x.to_vec();
                let mut ls = state.to_vec();
                let mut moves = Vec::new();
                let mut eps_used = Vec::new();
                let mut uncertified = 0;
                let mut flops = 0.0;
                for &i in blocks {
                    if selected.is_some_and(|s| !s[i]) {
                        continue;
                    }
                    let r = p.blocks.range(i);
                    let g = p.oracle.grad_block_state(&lx, &ls, r.clone());
                    let eps = self.eps_for(gamma, &g);
                    let resp = subprob::solve_block(p, cfg.kind, i, &lx, &ls, &g, tau[i], eps, &self.opts)?;
                    let d: Vec<f64> = resp.z.iter().zip(&lx[r.clone()]).map(|(zj, xj)| gamma * (zj - xj)).collect();
                    for (xj, dj) in lx[r.clone()].iter_mut().zip(&d) {
                        *xj += dj;
                    }
                    p.oracle.apply_block_delta(&mut ls, r.clone(), &d);
                    flops += p.oracle.flops_grad_block(r.clone()) + resp.flops + p.oracle.flops_apply_block(r);
                    eps_used.push(eps);
                    uncertified += usize::from(!resp.certified);
                    moves.push((i, d));
                }
                Ok((moves, eps_used, uncertified, flops))
        };
        let sweeps: Vec<Result<Sweep>> = self.pool.install(|| self.partition.par_iter().map(sweep).collect());
        let mut delta = vec![0.0; x.len()];
        let mut count = 0;
        let mut flops = 0.0;
        for s in sweeps {
            let (moves, eps_used, uncertified, f) = s?;
            solves.uncertified += uncertified;
            solves.eps_violations += eps_used.iter().filter(|e| **e > solves.gamma_bound).count();
            flops += f;
            count += moves.len();
            for (i, d) in moves {
                delta[p.blocks.range(i)].copy_from_slice(&d);
            }
        }
        Ok((delta, count, flops))
    }
}

/// Raises `τ_i` where needed so every subproblem stays strongly convex.
/// Smallest admissible `τ_i`: strictly above half the negative Hessian
/// bound, and large enough for the block subproblem curvature to clear `q_min`.
fn tau_floor(p: &ProblemInstance, cfg: &SolverConfig) -> Vec<f64> {
    let shift = (-0.5 * p.oracle.hessian_lower_bound()).max(0.0);
    let shift = shift + shift * 1e-12;
    (0..p.num_blocks())
        .map(|i| subprob::min_tau(p, cfg.kind, i, 2.0 * cfg.q_min).max(shift))
        .collect()
}

fn all_finite(v: &[f64], term: &str) -> Result<()> {
    if let Some(bad) = v.iter().find(|a| !a.is_finite()) {
        return Err(Error::NonFinite {
            term: term.into(),
            value: *bad,
        });
    }
    Ok(())
}

pub(super) fn run(
    p: &ProblemInstance,
    cfg: &SolverConfig,
    pool: &rayon::ThreadPool,
    observer: &mut dyn FnMut(&IterateView),
) -> Result<SolveResult> {
    let start = Instant::now();
    let ctx = Ctx {
        p,
        cfg,
        pool,
        opts: InnerOptions {
            max_iters: cfg.inner_max_iters,
            q_min: cfg.q_min,
        },
        partition: cfg.resolved_partition(p.num_blocks()),
    };

    let mut tau = cfg.tau.initial(p)?;
    let floor = tau_floor(p, cfg);
    let mut log = HypothesisLog::default();
    for (t, f) in tau.iter_mut().zip(&floor) {
        if *t < *f {
            *t = *f;
            log.tau_raised += 1;
        }
    }
    if log.tau_raised > 0 {
        log::info!("raised tau on {} blocks to keep subproblems strongly convex", log.tau_raised);
    }

    let mut x = p.feasible.project(cfg.x0.as_deref().unwrap_or(&vec![0.0; p.dim()]));
    let mut state = p.oracle.init_state(&x);
    let mut flops = p.oracle.flops_apply_block(0..p.dim()) + p.oracle.flops_eval();
    let mut v = p.eval_v_state(&x, &state)?;
    let mut steps = cfg.step_schedule()?;
    let mut counters = TauCounters::default();
    let tau0_sum = linalg::sum(&tau);
    let mut tau_scale = 1.0;
    let mut trace = RunTrace::default();
    let mut grad_cache: Option<Vec<f64>> = None;
    let mut accepted = 0;
    let mut last_merit = f64::NAN;

    let needs_full_grad = cfg.merit.needs_gradient()
        || cfg.algorithm == Algorithm::Flexa
        || (cfg.algorithm == Algorithm::GjSelection && cfg.selection != SelectionRule::Threshold(0.0));

    let mut k = 0;
    let status = loop {
        let step: Result<Option<Status>> = (|| {
            if k > 0 && k % cfg.refresh_every == 0 {
                state = p.oracle.init_state(&x);
                flops += p.oracle.flops_apply_block(0..p.dim());
                grad_cache = None;
            }
            let grad = if needs_full_grad {
                match grad_cache.take() {
                    Some(g) => Some(g),
                    None => {
                        let (g, f) = ctx.full_grad(&x, &state);
                        all_finite(&g, "gradient")?;
                        flops += f;
                        Some(g)
                    }
                }
            } else {
                None
            };
            let merit = match (&grad, cfg.merit) {
                (_, Merit::Re) => p.relative_error(v)?,
                (Some(g), m) => m.eval(p, &x, v, g)?,
                (None, _) => unreachable!("gradient is computed whenever the merit needs it"),
            };
            last_merit = merit;
            let gamma = if k > 0 { steps.step_update(merit) } else { steps.gamma() };
            if !(gamma > 0.0 && gamma <= 1.0) {
                log.gamma_violations += 1;
            }
            debug_assert!(gamma > 0.0 && gamma <= 1.0);

            let wall = start.elapsed().as_secs_f64();
            let mut row = TraceRecord {
                k,
                wall_seconds: if cfg.record_wall_time { wall } else { 0.0 },
                v,
                merit,
                selected: 0,
                gamma,
                tau_scale,
                flops,
                discarded: false,
            };
            let stop = if merit <= cfg.tol {
                Some(Status::Converged)
            } else if k >= cfg.max_iters {
                Some(Status::MaxIters)
            } else if cfg.time_limit.is_some_and(|t| wall >= t) {
                Some(Status::TimeLimit)
            } else {
                None
            };
            if let Some(s) = stop {
                observer(&IterateView {
                    k,
                    x: &x,
                    v,
                    merit,
                    best_response: None,
                    discarded: false,
                });
                trace.push(row);
                return Ok(Some(s));
            }

            let mut solves = Solves {
                gamma_bound: cfg.eps.bound(gamma),
                eps_violations: 0,
                uncertified: 0,
            };
            let proposal = match cfg.algorithm {
                Algorithm::Flexa => ctx.flexa(&x, &state, grad.as_deref().unwrap(), &tau, gamma, &mut solves)?,
                Algorithm::GaussJacobi => {
                    let (delta, selected, f) = ctx.gauss_jacobi(&x, &state, &tau, gamma, None, &mut solves)?;
                    Proposal {
                        delta,
                        selected,
                        flops: f,
                        best_response: None,
                    }
                }
                Algorithm::GjSelection => match &grad {
                    Some(g) if cfg.selection != SelectionRule::Threshold(0.0) => {
                        let (z, e, f0) = ctx.jacobi_pass(&x, &state, g, &tau, gamma, &mut solves)?;
                        let sel = control::select(cfg.selection, &e);
                        let mut mask = vec![false; p.num_blocks()];
                        for &i in &sel.indices {
                            mask[i] = true;
                        }
                        let (delta, selected, f) = ctx.gauss_jacobi(&x, &state, &tau, gamma, Some(&mask), &mut solves)?;
                        Proposal {
                            delta,
                            selected,
                            flops: f0 + f,
                            best_response: Some(z),
                        }
                    }
                    _ => {
                        let (delta, selected, f) = ctx.gauss_jacobi(&x, &state, &tau, gamma, None, &mut solves)?;
                        Proposal {
                            delta,
                            selected,
                            flops: f,
                            best_response: None,
                        }
                    }
                },
            };
            log.eps_violations += solves.eps_violations;
            log.uncertified_solves += solves.uncertified;
            all_finite(&proposal.delta, "update")?;

            let mut new_state = state.clone();
            p.oracle.apply_delta(&mut new_state, &proposal.delta);
            let changed: f64 = (0..p.dim())
                .filter(|&j| proposal.delta[j] != 0.0)
                .map(|j| p.oracle.flops_apply_block(j..j + 1))
                .sum();
            let new_x: Vec<f64> = x.iter().zip(&proposal.delta).map(|(a, d)| a + d).collect();
            let new_v = p.eval_v_state(&new_x, &new_state)?;
            let iter_flops = proposal.flops + changed + p.oracle.flops_eval();

            let (action, discard) = control::tau_update(&cfg.tau, &mut counters, new_v, v, merit);
            row.selected = proposal.selected;
            row.discarded = discard;
            observer(&IterateView {
                k,
                x: &x,
                v,
                merit,
                best_response: proposal.best_response.as_deref(),
                discarded: discard,
            });
            trace.push(row);
            flops += iter_flops;

            if discard {
                log.discarded += 1;
                grad_cache = grad;
            } else {
                x = new_x;
                state = new_state;
                v = new_v;
                accepted += 1;
            }
            match action {
                TauAction::Keep => {}
                TauAction::Double => tau.iter_mut().for_each(|t| *t *= 2.0),
                TauAction::Halve => {
                    for (t, f) in tau.iter_mut().zip(&floor) {
                        *t = (*t * 0.5).max(*f);
                    }
                }
            }
            if action != TauAction::Keep {
                tau_scale = linalg::sum(&tau) / tau0_sum;
            }
            log.tau_updates = counters.updates;
            Ok(None)
        })();
        match step {
            Ok(None) => k += 1,
            Ok(Some(s)) => break s,
            Err(e) => {
                log::warn!("solve stopped at iteration {k}: {e}");
                break Status::Failed(e.to_string());
            }
        }
    };

    Ok(SolveResult {
        x,
        v,
        merit: last_merit,
        trace,
        status,
        log,
        iterations: k,
        accepted,
    })
}
