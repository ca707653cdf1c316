use std::collections::VecDeque;

use super::{prox_full, BaselineOptions, BaselineResult, Recorder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::solvers::Status;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsaParams {
    /// Length of the objective history for the nonmonotone test.
    pub m: usize,
    pub sigma: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Step used on the first iteration and whenever the BB quotient is not positive.
    pub alpha_init: f64,
    pub max_halvings: usize,
}

impl Default for SparsaParams {
    fn default() -> Self {
        Self {
            m: 5,
            sigma: 0.01,
            alpha_min: 1e-30,
            alpha_max: 1e30,
            alpha_init: 1.0,
            max_halvings: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsaState {
    pub x: Vec<f64>,
    /// Spectral step length.
    pub alpha: f64,
    /// Last `m` accepted objective values, oldest first.
    pub history: VecDeque<f64>,
}

impl SparsaState {
    /// Barzilai-Borwein step `sᵀs / sᵀy`, clamped, or the fallback when
    /// `sᵀy ≤ 0`.
    pub fn bb_step(params: &SparsaParams, s: &[f64], y: &[f64]) -> f64 {
        let sy = linalg::dot(s, y);
        if sy > 0.0 {
            (linalg::dot(s, s) / sy).clamp(params.alpha_min, params.alpha_max)
        } else {
            params.alpha_init
        }
    }

    fn push_history(&mut self, m: usize, v: f64) {
        if self.history.len() == m {
            self.history.pop_front();
        }
        self.history.push_back(v);
    }

    fn reference(&self) -> f64 {
        self.history.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Spectral proximal gradient with a nonmonotone acceptance test. A line
/// search stall ends the run with [`Status::Failed`] and the trace so far.
pub fn sparsa_solve(p: &ProblemInstance, opts: &BaselineOptions) -> Result<BaselineResult> {
    sparsa_solve_with(p, opts, &SparsaParams::default())
}

pub(crate) fn sparsa_solve_with(p: &ProblemInstance, opts: &BaselineOptions, params: &SparsaParams) -> Result<BaselineResult> {
    opts.validate(p)?;
    let x0 = p.feasible.project(opts.x0.as_deref().unwrap_or(&vec![0.0; p.dim()]));
    let v0 = p.eval_v(&x0)?;
    let mut st = SparsaState {
        x: x0,
        alpha: params.alpha_init,
        history: VecDeque::with_capacity(params.m),
    };
    st.push_history(params.m, v0);
    let mut rec = Recorder::new(p, opts);
    rec.flops += rec.eval_flops();

    let mut v = v0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut k = 0;
    let status = loop {
        match iterate(p, params, &mut st, &mut rec, &mut prev, &mut v, k) {
            Ok(Some(s)) => break s,
            Ok(None) => k += 1,
            Err(e) => {
                log::warn!("SpaRSA stopped at iteration {k}: {e}");
                break Status::Failed(e.to_string());
            }
        }
    };
    let merit = rec.trace.last().map_or(f64::NAN, |r| r.merit);
    Ok(BaselineResult {
        x: st.x,
        v,
        merit,
        trace: rec.trace,
        status,
        iterations: k,
    })
}

fn iterate(
    p: &ProblemInstance,
    params: &SparsaParams,
    st: &mut SparsaState,
    rec: &mut Recorder,
    prev: &mut Option<(Vec<f64>, Vec<f64>)>,
    v: &mut f64,
    k: usize,
) -> Result<Option<Status>> {
    let g = p.oracle.full_grad(&st.x);
    rec.flops += rec.grad_flops();
    if let Some((xp, gp)) = prev.as_ref() {
        let s: Vec<f64> = st.x.iter().zip(xp).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
        st.alpha = SparsaState::bb_step(params, &s, &y);
    }
    let merit = rec.merit(&st.x, *v, Some(&g))?;
    if let Some(s) = rec.row(k, *v, merit, st.alpha) {
        return Ok(Some(s));
    }

    let reference = st.reference();
    let mut halvings = 0;
    let (x_new, v_new, dd) = loop {
        let u: Vec<f64> = st.x.iter().zip(&g).map(|(a, b)| a - st.alpha * b).collect();
        let cand = prox_full(p, &u, 1.0 / st.alpha);
        let dd: f64 = cand.iter().zip(&st.x).map(|(a, b)| (a - b) * (a - b)).sum();
        let vc = p.eval_v(&cand)?;
        rec.flops += rec.eval_flops();
        if vc <= reference - params.sigma / (2.0 * st.alpha) * dd {
            break (cand, vc, dd);
        }
        if halvings == params.max_halvings {
            return Err(Error::Numeric(format!("line search stalled after {} halvings", params.max_halvings)));
        }
        st.alpha = (st.alpha / 2.0).max(params.alpha_min);
        halvings += 1;
    };
    assert!(v_new <= reference - params.sigma / (2.0 * st.alpha) * dd, "nonmonotone acceptance violated");
    *prev = Some((std::mem::replace(&mut st.x, x_new), g));
    *v = v_new;
    st.push_history(params.m, v_new);
    Ok(None)
}
