//! `compare`: the cross-product of runs × seeds described by a TOML file.
//!
//! ```toml
//! [suite]
//! out = "results"
//! repetitions = 10        # seeds 0..10 unless `seeds` is given
//! merit = "re"
//! tol = 1e-6
//! max_iters = 10000
//! time_budget = 60.0      # seconds per run
//! record_wall_time = true
//!
//! [instance]
//! kind = "lasso"          # lasso | ncvxqp | dir | libsvm
//! m = 900
//! n = 1000
//! sparsity = 0.01
//!
//! [control]
//! gamma0 = 0.9
//!
//! [[run]]
//! algo = "flexa"
//! sigma = 0.5
//! workers = 1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use flexa::control::{Merit, SelectionRule, StepMode};
use flexa::problems::{ncvxqp_analogue, ncvxqp_generate, nesterov_generate};
use flexa::solvers::fmt_g17;
use flexa::{ApproximationKind, ProblemInstance};
use serde::Deserialize;

use crate::aggregate::{first_crossing, mean, median, AGGREGATE_HEADER, DEFAULT_THRESHOLDS};
use crate::cli::load_problem;
use crate::run::{execute, Algo, Control, RunOutcome, RunSettings};
use crate::usage;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub suite: Option<SuiteSection>,
    pub instance: Option<InstanceSection>,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub run: Vec<RunSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    pub out: PathBuf,
    #[serde(default = "one")]
    pub repetitions: usize,
    pub seeds: Option<Vec<u64>>,
    pub merit: Option<String>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    pub time_budget: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
    /// `false` writes 0 for wall_seconds, making traces byte-reproducible.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub kind: String,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    pub c: Option<f64>,
    pub cbar: Option<f64>,
    pub kappa: Option<f64>,
    #[serde(rename = "box")]
    pub b_box: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub approx: Option<String>,
    pub gamma0: Option<f64>,
    pub theta: Option<f64>,
    pub step_mode: Option<String>,
    pub alpha1: Option<f64>,
    pub alpha2: Option<f64>,
    /// `"trace"` or a number.
    pub tau_init: Option<toml::Value>,
    pub tau_max_updates: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algo: String,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    #[serde(default = "one")]
    pub workers: usize,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    10_000
}
fn default_m() -> usize {
    900
}
fn default_n() -> usize {
    1000
}
fn default_sparsity() -> f64 {
    0.01
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        match toml::from_str(text) {
            Ok(s) => Ok(s),
            Err(e) => usage(format!("invalid experiment spec: {e}")),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        let suite = self.suite.as_ref().expect("validated");
        suite
            .seeds
            .clone()
            .unwrap_or_else(|| (0..suite.repetitions as u64).collect())
    }
}

fn parse_value<T: FromStr>(what: &str, s: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    match s.parse() {
        Ok(v) => Ok(v),
        Err(e) => usage(format!("{what}: {e}")),
    }
}

fn control(sec: &ControlSection) -> Result<Control> {
    let mut c = Control::default();
    if let Some(a) = &sec.approx {
        c.kind = parse_value::<ApproximationKind>("approx", a)?;
    }
    if let Some(v) = sec.gamma0 {
        c.gamma0 = v;
    }
    if let Some(v) = sec.theta {
        c.theta = v;
    }
    if let Some(m) = &sec.step_mode {
        c.step_mode = parse_value::<StepMode>("step_mode", m)?;
    }
    if let Some(v) = sec.alpha1 {
        c.alpha1 = v;
    }
    if let Some(v) = sec.alpha2 {
        c.alpha2 = v;
    }
    match &sec.tau_init {
        None => {}
        Some(toml::Value::String(s)) if s == "trace" => c.tau_init = None,
        Some(toml::Value::Float(t)) => c.tau_init = Some(*t),
        Some(toml::Value::Integer(t)) => c.tau_init = Some(*t as f64),
        Some(v) => return usage(format!("tau_init must be \"trace\" or a number, got {v}")),
    }
    if let Some(v) = sec.tau_max_updates {
        c.tau_max_updates = v;
    }
    Ok(c)
}

fn selection(run: &RunSection, sec: &ControlSection) -> Result<SelectionRule> {
    let rule = match (run.sigma, run.rho) {
        (Some(_), Some(_)) => return usage(format!("run `{}`: give sigma or rho, not both", run.algo)),
        (Some(s), None) => SelectionRule::Threshold(s),
        (None, Some(r)) => SelectionRule::TopRho(r),
        (None, None) => match (sec.sigma, sec.rho) {
            (_, Some(r)) => SelectionRule::TopRho(r),
            (Some(s), None) => SelectionRule::Threshold(s),
            (None, None) => SelectionRule::Threshold(0.5),
        },
    };
    if let Err(e) = rule.validate() {
        return usage(e.to_string());
    }
    Ok(rule)
}

fn build_instance(sec: &InstanceSection, seed: u64, base: &Path) -> Result<ProblemInstance> {
    let p = match sec.kind.as_str() {
        "lasso" => nesterov_generate(sec.m, sec.n, sec.sparsity, sec.c.unwrap_or(1.0), seed)?.into_problem()?,
        "ncvxqp" => {
            let b_box = sec.b_box.unwrap_or(1.0);
            match (sec.cbar, sec.kappa) {
                (Some(cbar), None) => ncvxqp_generate(sec.m, sec.n, sec.sparsity, sec.c.unwrap_or(1.0), cbar, b_box, seed)?,
                (None, Some(kappa)) => ncvxqp_analogue(sec.m, sec.n, sec.sparsity, kappa, sec.c.unwrap_or(0.1), b_box, seed)?,
                _ => return usage("instance kind `ncvxqp` needs cbar or kappa"),
            }
            .into_problem()?
        }
        "dir" | "libsvm" => {
            let Some(path) = &sec.path else {
                return usage(format!("instance kind `{}` needs a path", sec.kind));
            };
            let path = base.join(path);
            if sec.kind == "dir" {
                load_problem(Some(&path), None, None)?
            } else {
                load_problem(None, Some(&path), sec.c)?
            }
        }
        k => return usage(format!("unknown instance kind `{k}`")),
    };
    Ok(p)
}

/// Per-run record kept for the aggregate table.
struct Done {
    algo: &'static str,
    sigma: String,
    workers: usize,
    seed: u64,
    outcome: Option<RunOutcome>,
}

fn sigma_label(algo: Algo, rule: SelectionRule) -> String {
    if !algo.uses_selection() {
        return String::new();
    }
    match rule {
        SelectionRule::Threshold(s) => fmt_g17(s),
        SelectionRule::TopRho(r) => format!("rho:{}", fmt_g17(r)),
    }
}

pub fn compare(spec_path: &Path) -> Result<()> {
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = ExperimentSpec::parse(&text)?;
    let base = spec_path.parent().unwrap_or(Path::new("."));
    run_suite(&spec, base)
}

pub fn run_suite(spec: &ExperimentSpec, base: &Path) -> Result<()> {
    let (Some(suite), Some(inst)) = (&spec.suite, &spec.instance) else {
        return usage("experiment spec needs [suite] and [instance] sections");
    };
    if spec.run.is_empty() {
        return usage("experiment spec has no [[run]] entries");
    }
    if suite.repetitions == 0 {
        return usage("repetitions must be at least 1");
    }
    let ctl = control(&spec.control)?;
    let mut plans = Vec::with_capacity(spec.run.len());
    for r in &spec.run {
        let algo: Algo = match r.algo.parse() {
            Ok(a) => a,
            Err(e) => return usage(e),
        };
        plans.push((algo, selection(r, &spec.control)?, r.workers));
    }
    let thresholds = suite.thresholds.clone().unwrap_or(DEFAULT_THRESHOLDS.to_vec());
    let out = base.join(&suite.out);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let mut done = Vec::new();
    let mut runs_csv = String::from("algo,sigma,workers,seed,status,iters,wall_s,V,merit\n");
    for seed in spec.seeds() {
        let p = build_instance(inst, seed, base).with_context(|| format!("building instance for seed {seed}"))?;
        let merit = match &suite.merit {
            Some(m) => parse_value::<Merit>("merit", m)?,
            None => Merit::default_for(&p),
        };
        for &(algo, rule, workers) in &plans {
            let mut s = RunSettings::new(algo, merit);
            s.selection = rule;
            s.workers = workers;
            s.tol = suite.tol;
            s.max_iters = suite.max_iters;
            s.seed = seed;
            s.time_limit = suite.time_budget;
            s.record_wall_time = suite.record_wall_time;
            s.control = ctl.clone();
            let label = sigma_label(algo, rule);
            let name = format!(
                "{}{}_w{}_seed{}.csv",
                algo.as_str(),
                if label.is_empty() { String::new() } else { format!("_s{}", label.replace(':', "")) },
                workers,
                seed
            );
            let outcome = match execute(&p, &s) {
                Ok(o) => {
                    o.trace.save_csv(out.join(&name))?;
                    log::info!("{name}: {}", o.summary());
                    let _ = writeln!(
                        runs_csv,
                        "{},{},{},{},{},{},{},{},{}",
                        algo.as_str(),
                        label,
                        workers,
                        seed,
                        o.status,
                        o.iterations,
                        fmt_g17(o.wall_seconds()),
                        fmt_g17(o.v),
                        fmt_g17(o.merit)
                    );
                    Some(o)
                }
                Err(e) => {
                    if e.downcast_ref::<crate::UsageError>().is_some() {
                        return Err(e);
                    }
                    log::warn!("{name} failed: {e:#}");
                    let _ = writeln!(runs_csv, "{},{},{},{},error,,,,", algo.as_str(), label, workers, seed);
                    None
                }
            };
            done.push(Done {
                algo: algo.as_str(),
                sigma: label,
                workers,
                seed,
                outcome,
            });
        }
    }
    fs::write(out.join("runs.csv"), runs_csv)?;
    fs::write(out.join("aggregate.csv"), aggregate_table(&done, &thresholds))?;
    Ok(())
}

fn aggregate_table(done: &[Done], thresholds: &[f64]) -> String {
    let mut s = String::from(AGGREGATE_HEADER);
    s.push('\n');
    let cell = |v: Option<f64>| v.map_or_else(String::new, fmt_g17);
    let mut groups: BTreeMap<(usize, String, usize), Vec<&Done>> = BTreeMap::new();
    for (order, d) in done.iter().enumerate() {
        let first = done
            .iter()
            .position(|e| e.algo == d.algo && e.sigma == d.sigma && e.workers == d.workers)
            .unwrap_or(order);
        groups.entry((first, d.sigma.clone(), d.workers)).or_default().push(d);
    }
    for runs in groups.values() {
        let head = runs[0];
        for &t in thresholds {
            let mut hits = Vec::new();
            for d in runs {
                let c = d.outcome.as_ref().and_then(|o| first_crossing(&o.trace.records, t));
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    d.algo,
                    d.sigma,
                    d.workers,
                    d.seed,
                    format!("{t:e}"),
                    cell(c.map(|c| c.iters)),
                    cell(c.map(|c| c.wall_s)),
                    cell(c.map(|c| c.flops))
                );
                hits.extend(c);
            }
            for (name, f) in [("median", median as fn(&[f64]) -> f64), ("mean", mean)] {
                let col = |g: fn(&crate::aggregate::Crossing) -> f64| {
                    let v: Vec<f64> = hits.iter().map(g).collect();
                    if v.is_empty() {
                        String::new()
                    } else {
                        fmt_g17(f(&v))
                    }
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{}",
                    head.algo,
                    head.sigma,
                    head.workers,
                    name,
                    format!("{t:e}"),
                    col(|c| c.iters),
                    col(|c| c.wall_s),
                    col(|c| c.flops)
                );
            }
        }
    }
    s
}
