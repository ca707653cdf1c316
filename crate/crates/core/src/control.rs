//! Outer-iteration control: error bounds, greedy selection, step sizes,
//! inexactness tolerances, proximal-weight adaptation and merit functions.

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;
use crate::subprob::{self, ApproximationKind};

/// How `S^k` is chosen from the error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectionRule {
    /// `{i : E_i ≥ σ M}`; `σ = 0` updates every block.
    Threshold(f64),
    /// `{i : E_i > ρ M}` plus the first maximizer; `ρ = 1` is Gauss-Southwell.
    TopRho(f64),
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::Threshold(s) if !(0.0..=1.0).contains(&s) => {
                Err(Error::InvalidArgument(format!("sigma must be in [0, 1], got {s}")))
            }
            SelectionRule::TopRho(r) if !(r > 0.0 && r <= 1.0) => {
                Err(Error::InvalidArgument(format!("rho must be in (0, 1], got {r}")))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of [`select`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Ascending block indices.
    pub indices: Vec<usize>,
    /// `M = max_i E_i`.
    pub max: f64,
}

impl Selection {
    /// True when every error bound vanished.
    pub fn is_stationary(&self) -> bool {
        self.max == 0.0
    }
}

/// Chooses `S^k`. The result always contains a maximizer of `e`; when all
/// bounds are zero the full set is returned.
pub fn select(rule: SelectionRule, e: &[f64]) -> Selection {
    debug_assert!(e.iter().all(|v| *v >= 0.0));
    let (arg, max) = e
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if e.is_empty() || max <= 0.0 {
        return Selection {
            indices: (0..e.len()).collect(),
            max: max.max(0.0),
        };
    }
    let indices = match rule {
        SelectionRule::Threshold(sigma) => {
            let cut = sigma * max;
            (0..e.len()).filter(|&i| e[i] >= cut).collect()
        }
        SelectionRule::TopRho(rho) => {
            let cut = rho * max;
            (0..e.len()).filter(|&i| i == arg || e[i] > cut).collect()
        }
    };
    Selection { indices, max }
}

/// `E_i(x) = ‖x̂_i(x, τ_i) − x_i‖`, from a supplied exact response or the
/// closed form.
pub fn error_bound(
    p: &ProblemInstance,
    kind: ApproximationKind,
    i: usize,
    x: &[f64],
    tau_i: f64,
    z_i: Option<&[f64]>,
) -> Result<f64> {
    let xi = &x[p.blocks.range(i)];
    let dist = |z: &[f64]| {
        let d: Vec<f64> = z.iter().zip(xi).map(|(a, b)| a - b).collect();
        linalg::norm2(&d)
    };
    match z_i {
        Some(z) => Ok(dist(z)),
        None if subprob::has_closed_form(p, kind, i) => {
            let r = subprob::best_response_block(p, kind, i, x, tau_i, 0.0)?;
            Ok(dist(&r.z))
        }
        None => Err(Error::Unsupported(format!(
            "block {i} has no closed-form response under {}; supply z_i",
            kind.as_str()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMode {
    /// `γ^k = γ^{k−1}(1 − θγ^{k−1})`.
    Plain,
    /// `γ^k = γ^{k−1}(1 − min{1, floor/merit} θ γ^{k−1})`.
    MeritScaled,
}

impl FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(StepMode::Plain),
            "merit_scaled" => Ok(StepMode::MeritScaled),
            _ => Err(Error::InvalidArgument(format!("unknown step mode `{s}`"))),
        }
    }
}

/// Diminishing step-size schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub mode: StepMode,
    pub gamma0: f64,
    pub theta: f64,
    pub merit_floor: f64,
    gamma: f64,
}

impl StepSchedule {
    pub fn new(mode: StepMode, gamma0: f64, theta: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma0 must be in (0, 1], got {gamma0}")));
        }
        if !(0.0..1.0).contains(&theta) {
            return Err(Error::InvalidArgument(format!("theta must be in [0, 1), got {theta}")));
        }
        Ok(Self {
            mode,
            gamma0,
            theta,
            merit_floor: 1e-4,
            gamma: gamma0,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reset(&mut self) {
        self.gamma = self.gamma0;
    }

    /// Advances to the next `γ` and returns it.
    pub fn step_update(&mut self, merit: f64) -> f64 {
        let scale = match self.mode {
            StepMode::Plain => 1.0,
            StepMode::MeritScaled if merit > self.merit_floor => self.merit_floor / merit,
            StepMode::MeritScaled => 1.0,
        };
        self.gamma *= 1.0 - scale * self.theta * self.gamma;
        self.gamma
    }
}

/// `ε_i^k = γ^k α₁ min{α₂, 1/‖∇_iF(x^k)‖}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 10.0,
        }
    }
}

impl EpsSchedule {
    pub fn eps(&self, gamma: f64, grad_norm: f64) -> f64 {
        let inv = if grad_norm > 0.0 { 1.0 / grad_norm } else { f64::INFINITY };
        gamma * self.alpha1 * self.alpha2.min(inv)
    }

    pub fn bound(&self, gamma: f64) -> f64 {
        gamma * self.alpha1 * self.alpha2
    }
}

/// Initial proximal weights.
#[derive(Debug, Clone, PartialEq)]
pub enum TauInit {
    /// `tr(MᵀM)/2n` for the backend's data matrix.
    Trace,
    Explicit(Vec<f64>),
}

/// Doubling/halving heuristic for `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TauPolicy {
    pub init: TauInit,
    pub double_on_increase: bool,
    pub discard_on_double: bool,
    pub halve_after_decreases: usize,
    pub halve_when_merit_below: f64,
    pub max_updates: usize,
}

impl Default for TauPolicy {
    fn default() -> Self {
        Self {
            init: TauInit::Trace,
            double_on_increase: true,
            discard_on_double: true,
            halve_after_decreases: 10,
            halve_when_merit_below: 1e-2,
            max_updates: 100,
        }
    }
}

impl TauPolicy {
    /// Fixed `τ`: no adaptation at all.
    pub fn fixed(init: TauInit) -> Self {
        Self {
            init,
            double_on_increase: false,
            discard_on_double: false,
            halve_after_decreases: usize::MAX,
            halve_when_merit_below: f64::NEG_INFINITY,
            max_updates: 0,
        }
    }

    pub fn initial(&self, p: &ProblemInstance) -> Result<Vec<f64>> {
        let nb = p.num_blocks();
        let tau = match &self.init {
            TauInit::Trace => vec![p.oracle.trace_tau(); nb],
            TauInit::Explicit(t) if t.len() == 1 => vec![t[0]; nb],
            TauInit::Explicit(t) => t.clone(),
        };
        if tau.len() != nb {
            return Err(Error::Dimension {
                what: "initial tau",
                expected: nb,
                got: tau.len(),
            });
        }
        if let Some(bad) = tau.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be positive and finite, got {bad}")));
        }
        Ok(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauAction {
    Keep,
    Double,
    Halve,
}

/// Counters carried between calls to [`tau_update`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TauCounters {
    pub decrease_streak: usize,
    pub updates: usize,
}

/// Decides the `τ` action after a tentative step from `v_old` to `v_new`.
/// Returns the action and whether the iteration must be discarded.
pub fn tau_update(policy: &TauPolicy, counters: &mut TauCounters, v_new: f64, v_old: f64, merit: f64) -> (TauAction, bool) {
    let budget = counters.updates < policy.max_updates;
    if v_new >= v_old {
        counters.decrease_streak = 0;
        if policy.double_on_increase && budget {
            counters.updates += 1;
            return (TauAction::Double, policy.discard_on_double);
        }
        return (TauAction::Keep, false);
    }
    counters.decrease_streak += 1;
    let halve = counters.decrease_streak >= policy.halve_after_decreases || merit <= policy.halve_when_merit_below;
    if halve && budget {
        counters.updates += 1;
        counters.decrease_streak = 0;
        return (TauAction::Halve, false);
    }
    (TauAction::Keep, false)
}

/// `(V − V*)/V*`.
pub fn relative_error(v: f64, v_star: f64) -> Result<f64> {
    if !(v_star > 0.0) {
        return Err(Error::Unsupported(format!("relative error needs V* > 0, got {v_star}")));
    }
    Ok((v - v_star) / v_star)
}

/// Convergence measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Merit {
    /// Relative objective error against the known optimum.
    Re,
    /// `‖Z(x)‖∞`.
    ZInf,
    /// `‖Z̄(x)‖∞`, masking coordinates pushing against an active bound.
    ZBar,
}

impl Merit {
    pub fn as_str(self) -> &'static str {
        match self {
            Merit::Re => "re",
            Merit::ZInf => "zinf",
            Merit::ZBar => "zbar",
        }
    }

    /// `re` when `V*` is known, `‖Z‖∞` otherwise.
    pub fn default_for(p: &ProblemInstance) -> Self {
        if p.known_optimum.is_some() {
            Merit::Re
        } else if p.feasible.is_unbounded() {
            Merit::ZInf
        } else {
            Merit::ZBar
        }
    }

    /// Evaluates the merit given `V(x)` and the full gradient at `x`.
    pub fn eval(self, p: &ProblemInstance, x: &[f64], v: f64, grad: &[f64]) -> Result<f64> {
        match self {
            Merit::Re => p.relative_error(v),
            Merit::ZInf => p.residual_from_grad(x, grad, false),
            Merit::ZBar => p.residual_from_grad(x, grad, true),
        }
    }

    pub fn needs_gradient(self) -> bool {
        self != Merit::Re
    }
}

impl FromStr for Merit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "re" => Ok(Merit::Re),
            "zinf" | "z_inf" => Ok(Merit::ZInf),
            "zbar" | "z_bar" => Ok(Merit::ZBar),
            _ => Err(Error::InvalidArgument(format!("unknown merit `{s}`"))),
        }
    }
}
