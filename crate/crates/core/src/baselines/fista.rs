use super::{prox_full, BaselineOptions, BaselineResult, Recorder};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::solvers::Status;

pub const FISTA_L0: f64 = 1.0;
pub const FISTA_ETA: f64 = 2.0;
/// Backtracking gives up after this many doublings of `L` in one iteration.
pub const FISTA_MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct FistaState {
    pub x: Vec<f64>,
    /// Extrapolation point.
    pub y: Vec<f64>,
    pub t: f64,
    /// Current Lipschitz estimate.
    pub l: f64,
    pub eta: f64,
}

impl FistaState {
    pub fn new(x0: Vec<f64>) -> Self {
        Self {
            y: x0.clone(),
            x: x0,
            t: 1.0,
            l: FISTA_L0,
            eta: FISTA_ETA,
        }
    }

    pub fn next_t(t: f64) -> f64 {
        (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0
    }

    /// Moves to `x_new` and extrapolates.
    pub fn advance(&mut self, x_new: Vec<f64>) {
        let t_new = Self::next_t(self.t);
        let beta = (self.t - 1.0) / t_new;
        self.y = x_new
            .iter()
            .zip(&self.x)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        self.x = x_new;
        self.t = t_new;
    }
}

/// Accelerated proximal gradient with backtracking on `L`.
///
/// Rejects a nonconvex `F` unless `opts.force_nonconvex` is set. A backtracking
/// failure ends the run with [`Status::Failed`] and the trace so far.
pub fn fista_solve(p: &ProblemInstance, opts: &BaselineOptions) -> Result<BaselineResult> {
    opts.validate(p)?;
    if p.oracle.hessian_lower_bound() < 0.0 {
        if !opts.force_nonconvex {
            return Err(Error::Unsupported("FISTA needs a convex F; set force_nonconvex to run it anyway".into()));
        }
        log::warn!("running FISTA on a nonconvex objective");
    }
    let x0 = p.feasible.project(opts.x0.as_deref().unwrap_or(&vec![0.0; p.dim()]));
    let mut st = FistaState::new(x0);
    let mut rec = Recorder::new(p, opts);
    let needs_grad = opts.merit.needs_gradient();

    let mut k = 0;
    let status = loop {
        match iterate(p, &mut st, &mut rec, k, needs_grad) {
            Ok(Some(s)) => break s,
            Ok(None) => k += 1,
            Err(e) => {
                log::warn!("FISTA stopped at iteration {k}: {e}");
                break Status::Failed(e.to_string());
            }
        }
    };
    let v = p.eval_v(&st.x)?;
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

fn iterate(p: &ProblemInstance, st: &mut FistaState, rec: &mut Recorder, k: usize, needs_grad: bool) -> Result<Option<Status>> {
    let v = p.eval_v(&st.x)?;
    let merit = if needs_grad {
        let g = p.oracle.full_grad(&st.x);
        rec.flops += rec.grad_flops();
        rec.merit(&st.x, v, Some(&g))?
    } else {
        rec.merit(&st.x, v, None)?
    };
    if let Some(s) = rec.row(k, v, merit, 1.0 / st.l) {
        return Ok(Some(s));
    }

    let fy = p.oracle.eval_f(&st.y);
    let gy = p.oracle.full_grad(&st.y);
    rec.flops += rec.eval_flops() + rec.grad_flops();
    let mut doublings = 0;
    let z = loop {
        let v: Vec<f64> = st.y.iter().zip(&gy).map(|(a, g)| a - g / st.l).collect();
        let z = prox_full(p, &v, st.l);
        let d: Vec<f64> = z.iter().zip(&st.y).map(|(a, b)| a - b).collect();
        let model = fy + linalg::dot(&gy, &d) + 0.5 * st.l * linalg::dot(&d, &d);
        let fz = p.oracle.eval_f(&z);
        rec.flops += rec.eval_flops();
        if !fz.is_finite() {
            return Err(Error::NonFinite { term: "F".into(), value: fz });
        }
        if fz <= model + 1e-15 * model.abs() {
            break z;
        }
        if doublings == FISTA_MAX_DOUBLINGS {
            return Err(Error::Numeric(format!("backtracking failed after {FISTA_MAX_DOUBLINGS} doublings of L")));
        }
        st.l *= st.eta;
        doublings += 1;
    };
    st.advance(z);
    Ok(None)
}
