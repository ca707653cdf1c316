//! Acceptance checks. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; exits non-zero if any fails.
//!
//! `cargo test -p flexa --test acceptance -- 5 8` runs a subset.

mod common;

use std::time::Instant;

use common::*;
use flexa::baselines::{fista_solve, sparsa_solve, BaselineOptions};
use flexa::control::{Merit, SelectionRule, StepMode, TauInit, TauPolicy};
use flexa::linalg::{DenseMatrix, Matrix};
use flexa::problems::{ncvxqp_analogue, nesterov_generate, verify_lasso_optimum, GroupLassoInstance, LogisticInstance};
use flexa::solvers::{solve, solve_observed, Algorithm, SolverConfig, Status};
use flexa::subprob::{best_response_block, best_response_full, subproblem_curvature};
use flexa::{ApproximationKind, BlockStructure, Error, ProblemInstance};
use rand::Rng;

const KINDS: [ApproximationKind; 3] = [
    ApproximationKind::Linearized,
    ApproximationKind::ExactBlock,
    ApproximationKind::SecondOrderDiag,
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Smallest `τ` that keeps the quadratic model curvature positive, plus a
/// random margin.
fn random_tau(raw: &Raw, kind: ApproximationKind, x: &[f64], i: usize, r: &mut impl Rng) -> f64 {
    let base = match (kind, raw.backend) {
        (ApproximationKind::Linearized, _) => 0.0,
        (_, Backend::Ncvx) => (-raw.hess_diag(x, i)).max(0.0),
        _ => 0.0,
    };
    base + r.gen_range(0.1..3.0)
}

/// Quadratic curvature of the model in coordinate `i` (without `τ`).
fn model_curvature(raw: &Raw, kind: ApproximationKind, x: &[f64], i: usize) -> f64 {
    match kind {
        ApproximationKind::Linearized => 0.0,
        _ => raw.hess_diag(x, i),
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut count = 0;
    for (bi, &backend) in BACKENDS.iter().enumerate() {
        for (ki, &kind) in KINDS.iter().enumerate() {
            for trial in 0..100u64 {
                let seed = 1_000_000 * bi as u64 + 10_000 * ki as u64 + trial;
                let raw = Raw::random(backend, 6, 4, seed);
                let p = raw.problem();
                let mut r = rng(seed ^ 0x5eed);
                let x = raw.random_point(&mut r, 1.5);
                let i = r.gen_range(0..raw.n());
                let tau = random_tau(&raw, kind, &x, i, &mut r);
                let z = match best_response_block(&p, kind, i, &x, tau, 0.0) {
                    Ok(resp) => resp.z[0],
                    Err(e) => return outcome(false, format!("{backend:?}/{kind:?} trial {trial}: {e}")),
                };

                let g = raw.grad(&x)[i];
                let xi = x[i];
                let c = raw.c;
                let exact_logistic = backend == Backend::Logistic && kind == ApproximationKind::ExactBlock;
                let d = if exact_logistic { 0.0 } else { model_curvature(&raw, kind, &x, i) };
                let mu = d + tau;
                let less = |ta: f64, tb: f64| -> bool {
                    let reg = c * abs_diff(0.0, ta, tb);
                    let prox = 0.5 * tau * (ta - tb) * (ta + tb - 2.0 * xi);
                    let smooth = if exact_logistic {
                        (0..raw.m())
                            .map(|j| {
                                let yj = raw.rhs[j] * raw.rows[j][i];
                                let ub = raw.inner(j, &x) + yj * (tb - xi);
                                softplus_neg_diff(ub, yj * (ta - tb))
                            })
                            .sum::<f64>()
                    } else {
                        (ta - tb) * (g + 0.5 * d * (ta + tb - 2.0 * xi))
                    };
                    smooth + prox + reg < 0.0
                };
                let radius = 1.01 * (g.abs() + c) / mu + 1e-9;
                let (lo, hi) = raw.bounds();
                let t_star = golden_section((xi - radius).max(lo), (xi + radius).min(hi), less);
                worst = worst.max((z - t_star).abs());
                count += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-8 && secs < 5.0,
        format!("{count} subproblems, max |z - golden| = {worst:.2e} (tol 1e-8), {secs:.2}s (limit 5s)"),
    )
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut trials = 0;
    let mut violations = 0;
    let mut tightest = f64::INFINITY;
    for (bi, &backend) in BACKENDS.iter().enumerate() {
        for (ki, &kind) in KINDS.iter().enumerate() {
            for trial in 0..40u64 {
                let seed = 7_000_000 + 1_000_000 * bi as u64 + 10_000 * ki as u64 + trial;
                let raw = Raw::random(backend, 8, 6, seed);
                let p = raw.problem();
                let mut r = rng(seed ^ 0xdec);
                let y = raw.random_point(&mut r, 1.5);
                let n = raw.n();
                let tau: Vec<f64> = (0..n).map(|i| random_tau(&raw, kind, &y, i, &mut r)).collect();
                let mut subset: Vec<usize> = (0..n).filter(|_| r.gen_bool(0.5)).collect();
                if subset.is_empty() {
                    subset.push(r.gen_range(0..n));
                }
                let (xhat, _) = best_response_full(&p, kind, &y, &tau, &vec![0.0; n]).expect("exact responses");
                let c_tau = (0..n)
                    .map(|i| subproblem_curvature(&p, kind, i, &y, tau[i], 0.0).unwrap()[0])
                    .fold(f64::INFINITY, f64::min);
                let grad = raw.grad(&y);
                let mut lhs = 0.0;
                let mut scale = 0.0;
                let mut dist_sq = 0.0;
                for &i in &subset {
                    let d = xhat[i] - y[i];
                    let terms = [d * grad[i], raw.c * xhat[i].abs(), -raw.c * y[i].abs()];
                    lhs += terms.iter().sum::<f64>();
                    scale += terms.iter().map(|t| t.abs()).sum::<f64>();
                    dist_sq += d * d;
                }
                let rhs = -c_tau * dist_sq;
                trials += 1;
                if lhs > rhs + 1e-12 * (1.0 + scale) {
                    violations += 1;
                }
                if dist_sq > 0.0 {
                    tightest = tightest.min((rhs - lhs) / dist_sq);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 10.0,
        format!("{trials} triples, {violations} violations, min slack/‖d‖² = {tightest:.3e}, {secs:.2}s (limit 10s)"),
    )
}

fn criterion_3() -> Outcome {
    let mut checked = 0;
    let mut rejected = 0;
    let mut worst_fp = 0.0f64;
    let mut worst_res = 0.0f64;
    let mut cases = Vec::new();
    for sp in [0.01, 0.1, 0.4] {
        for seed in 0..10 {
            cases.push((90, 100, sp, seed));
        }
        for seed in 0..2 {
            cases.push((900, 1000, sp, seed));
        }
    }
    for (m, n, sp, seed) in cases {
        let inst = match nesterov_generate(m, n, sp, 1.0, seed) {
            Ok(i) => i,
            Err(Error::Generation(_)) => {
                rejected += 1;
                continue;
            }
            Err(e) => return outcome(false, format!("m={m} n={n} sp={sp} seed={seed}: {e}")),
        };
        let opt = inst.known_optimum.clone().unwrap();
        let rows = dense_rows(&inst.a);
        // Independent subgradient check from the raw data.
        let resid: Vec<f64> = rows.iter().zip(&inst.b).map(|(r, b)| r.iter().zip(&opt.x).map(|(a, x)| a * x).sum::<f64>() - b).collect();
        let mut naive = 0.0f64;
        for j in 0..n {
            let g: f64 = 2.0 * rows.iter().zip(&resid).map(|(r, s)| r[j] * s).sum::<f64>();
            let v = if opt.x[j] != 0.0 {
                (g + inst.c * opt.x[j].signum()).abs()
            } else {
                (g.abs() - inst.c).max(0.0)
            };
            naive = naive.max(v);
        }
        let lib = verify_lasso_optimum(&inst, &opt.x).unwrap();
        let p = inst.into_problem().unwrap();
        let tau = vec![p.oracle.trace_tau(); p.num_blocks()];
        let (xhat, _) = best_response_full(&p, ApproximationKind::ExactBlock, &opt.x, &tau, &vec![0.0; p.num_blocks()]).unwrap();
        worst_fp = worst_fp.max(max_abs_diff(&xhat, &opt.x));
        worst_res = worst_res.max(p.stationarity_residual(&opt.x).unwrap()).max(naive).max(lib);
        checked += 1;
    }
    outcome(
        worst_fp <= 1e-8 && worst_res <= 1e-8 && checked > 0,
        format!("{checked} instances verified, {rejected} rejected; max ‖x̂(x*)−x*‖∞ = {worst_fp:.2e}, max stationarity = {worst_res:.2e} (tol 1e-8)"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_naive = 0.0f64;
    let mut max_margin = 0.0f64;
    let mut points = 0;
    let group = |raw: &Raw| {
        let a = Matrix::Dense(DenseMatrix::from_rows(&raw.rows));
        GroupLassoInstance::new(a, raw.rhs.clone(), raw.c, BlockStructure::uniform(raw.n(), 2).unwrap())
            .unwrap()
            .into_problem()
            .unwrap()
    };
    let mut cases: Vec<(Raw, ProblemInstance, &str)> = BACKENDS
        .iter()
        .map(|&b| {
            let raw = Raw::random(b, 10, 6, 40 + b as u64);
            let p = raw.problem();
            (raw, p, "")
        })
        .collect();
    let glasso = Raw::random(Backend::Lasso, 10, 6, 99);
    let gp = group(&glasso);
    cases.push((glasso, gp, "group"));
    for (ci, (raw, p, _)) in cases.iter().enumerate() {
        let mut r = rng(4000 + ci as u64);
        for pt in 0..20 {
            let mut x = raw.random_point(&mut r, 2.0);
            if raw.backend == Backend::Logistic && pt >= 10 {
                // Push the largest margin to about 10^4 (either sign).
                let top = (0..raw.m()).map(|j| raw.inner(j, &x).abs()).fold(0.0, f64::max);
                let s = 10f64.powf(1.0 + 3.0 * (pt - 10) as f64 / 9.0) / top.max(1e-12);
                x.iter_mut().for_each(|v| *v *= s);
                if pt % 2 == 1 {
                    x.iter_mut().for_each(|v| *v = -*v);
                }
            }
            if raw.backend == Backend::Logistic {
                max_margin = max_margin.max((0..raw.m()).map(|j| raw.inner(j, &x).abs()).fold(0.0, f64::max));
            }
            let g = p.oracle.full_grad(&x);
            let f = |y: &[f64]| p.oracle.eval_f(y);
            if !g.iter().all(|v| v.is_finite()) || !f(&x).is_finite() {
                return outcome(false, format!("non-finite F or gradient at case {ci} point {pt}"));
            }
            let scale = g.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            for j in 0..x.len() {
                let h = 1e-5 * x[j].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (f(&xp) - f(&xm)) / (xp[j] - xm[j]);
                worst = worst.max((g[j] - fd).abs() / scale);
            }
            worst_naive = worst_naive.max(max_abs_diff(&g, &raw.grad(&x)) / scale);
            points += 1;
        }
    }
    outcome(
        worst <= 1e-6 && worst_naive <= 1e-10,
        format!(
            "{points} points over 4 backends, max relative FD error {worst:.2e} (tol 1e-6), vs naive gradient {worst_naive:.2e}, max |margin| {max_margin:.1e}"
        ),
    )
}

fn lasso_desk(sp: f64, seed: u64) -> ProblemInstance {
    nesterov_generate(900, 1000, sp, 1.0, seed).unwrap().into_problem().unwrap()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for sp in [0.01, 0.1, 0.4] {
        let mut ok = 0;
        let mut worst_acc = 0;
        for seed in 0..10 {
            let p = lasso_desk(sp, seed);
            let cfg = SolverConfig {
                max_iters: 20_000,
                ..SolverConfig::default()
            };
            let r = solve(&p, &cfg).unwrap();
            if r.status == Status::Converged && r.merit <= 1e-6 && r.accepted <= 10_000 {
                ok += 1;
            }
            worst_acc = worst_acc.max(r.accepted);
        }
        pass &= ok >= 9;
        lines.push(format!("{:.0}%: {ok}/10 (max accepted {worst_acc})", sp * 100.0));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 300.0, format!("{}; {secs:.1}s (limit 300s)", lines.join(", ")))
}

fn gj_reference_config(tau0: f64) -> SolverConfig {
    SolverConfig {
        algorithm: Algorithm::GaussJacobi,
        workers: 1,
        tau: TauPolicy::fixed(TauInit::Explicit(vec![tau0])),
        step_mode: StepMode::Plain,
        theta: 1e-2,
        tol: 0.0,
        max_iters: 100,
        merit: Merit::ZInf,
        ..SolverConfig::default()
    }
}

/// Cyclic Gauss-Seidel over scalar coordinates on the raw data.
fn naive_gauss_seidel(raw: &Raw, tau: f64, iters: usize, theta: f64) -> Vec<Vec<f64>> {
    let n = raw.n();
    let (lo, hi) = raw.bounds();
    let mut x = vec![0.0; n];
    let mut gamma: f64 = 0.9;
    let mut out = vec![x.clone()];
    for k in 0..iters {
        if k > 0 {
            gamma *= 1.0 - theta * gamma;
        }
        for i in 0..n {
            let g = raw.grad(&x)[i];
            let d = raw.hess_diag(&x, i) + tau;
            let v = x[i] - g / d;
            let t = raw.c / d;
            let z = (v.signum() * (v.abs() - t).max(0.0)).clamp(lo, hi);
            x[i] += gamma * (z - x[i]);
        }
        out.push(x.clone());
    }
    out
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // (a) P = 1 against the naive reference.
    let mut worst_a = 0.0f64;
    for (seed, backend) in [(61, Backend::Lasso), (62, Backend::Ncvx), (63, Backend::Lasso)] {
        let raw = Raw::random(backend, 30, 20, seed);
        let p = raw.problem();
        let tau0 = if backend == Backend::Ncvx { raw.cbar + 1.0 } else { p.oracle.trace_tau() };
        let cfg = gj_reference_config(tau0);
        let mut seen = Vec::new();
        let r = solve_observed(&p, &cfg, &mut |v| seen.push(v.x.to_vec())).unwrap();
        let reference = naive_gauss_seidel(&raw, tau0, 100, cfg.theta);
        if seen.len() != 101 || r.log.discarded != 0 {
            pass = false;
            notes.push(format!("(a) unexpected run length {} / discards {}", seen.len(), r.log.discarded));
        }
        for (a, b) in seen.iter().zip(&reference) {
            worst_a = worst_a.max(max_abs_diff(a, b));
        }
    }
    pass &= worst_a <= 1e-12;
    notes.push(format!("(a) max deviation {worst_a:.2e} (tol 1e-12)"));

    // (b) GJS with every block selected is GJ.
    let mut identical = true;
    let instances = [
        nesterov_generate(90, 100, 0.1, 1.0, 5).unwrap().into_problem().unwrap(),
        Raw::random(Backend::Ncvx, 40, 30, 64).problem(),
        Raw::random(Backend::Logistic, 60, 30, 65).problem(),
    ];
    for p in &instances {
        for workers in [1, 2, 3] {
            let base = SolverConfig {
                workers,
                max_iters: 300,
                merit: Merit::ZBar,
                tol: 1e-9,
                record_wall_time: false,
                ..SolverConfig::default()
            };
            let gj = solve(p, &SolverConfig { algorithm: Algorithm::GaussJacobi, ..base.clone() }).unwrap();
            let gjs = solve(
                p,
                &SolverConfig {
                    algorithm: Algorithm::GjSelection,
                    selection: SelectionRule::Threshold(0.0),
                    ..base.clone()
                },
            )
            .unwrap();
            let same_x = gj.x.iter().zip(&gjs.x).all(|(a, b)| a.to_bits() == b.to_bits());
            identical &= same_x && gj.trace.to_csv() == gjs.trace.to_csv();
        }
    }
    pass &= identical;
    notes.push(format!("(b) bitwise identical: {identical}"));

    // (c) FLEXA σ = 0 across worker counts.
    let p = lasso_desk(0.1, 3);
    let mut runs = Vec::new();
    for workers in [1, 2, 4, 8] {
        let cfg = SolverConfig {
            selection: SelectionRule::Threshold(0.0),
            workers,
            max_iters: 500,
            merit: Merit::ZInf,
            tol: 0.0,
            ..SolverConfig::default()
        };
        let mut seen = Vec::new();
        solve_observed(&p, &cfg, &mut |v| seen.push(v.x.to_vec())).unwrap();
        runs.push(seen);
    }
    let mut worst_c = 0.0f64;
    let mut same_len = true;
    for other in &runs[1..] {
        same_len &= other.len() == runs[0].len();
        for (a, b) in runs[0].iter().zip(other) {
            worst_c = worst_c.max(max_abs_diff(a, b));
        }
    }
    pass &= same_len && worst_c <= 1e-10 && runs[0].len() >= 500;
    notes.push(format!("(c) {} iterates, max deviation {worst_c:.2e} (tol 1e-10)", runs[0].len()));
    outcome(pass, notes.join("; "))
}

fn logistic_synthetic(m: usize, n: usize, c: f64, seed: u64) -> ProblemInstance {
    let mut r = rng(seed);
    let w: Vec<f64> = (0..n).map(|j| if j % 10 == 0 { r.gen_range(-2.0..2.0) } else { 0.0 }).collect();
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let labels: Vec<f64> = rows
        .iter()
        .map(|row| {
            let s: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + r.gen_range(-0.5..0.5);
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    LogisticInstance::new(Matrix::Dense(DenseMatrix::from_rows(&rows)), labels, c)
        .unwrap()
        .into_problem()
        .unwrap()
}

fn criterion_7() -> Outcome {
    let mut problems: Vec<(&str, ProblemInstance, Merit, f64)> = vec![
        ("lasso", lasso_desk(0.1, 11), Merit::Re, 1e-6),
        ("logistic", logistic_synthetic(200, 100, 0.25, 12), Merit::ZInf, 1e-4),
        ("ncvxqp", ncvxqp_analogue(300, 400, 0.05, 1.0, 0.1, 1.0, 13).unwrap().into_problem().unwrap(), Merit::ZBar, 1e-3),
    ];
    let raw = Raw::random(Backend::Lasso, 60, 40, 14);
    let gl = GroupLassoInstance::new(
        Matrix::Dense(DenseMatrix::from_rows(&raw.rows)),
        raw.rhs.clone(),
        raw.c,
        BlockStructure::uniform(40, 4).unwrap(),
    )
    .unwrap()
    .into_problem()
    .unwrap();
    problems.push(("group_lasso", gl, Merit::ZInf, 1e-6));

    let mut runs = 0;
    let (mut gamma_bad, mut eps_bad, mut uncertified, mut max_tau_updates) = (0, 0, 0, 0);
    for (_, p, merit, tol) in &problems {
        for (algorithm, workers) in [(Algorithm::Flexa, 2), (Algorithm::GaussJacobi, 3), (Algorithm::GjSelection, 2)] {
            let cfg = SolverConfig {
                algorithm,
                workers,
                merit: *merit,
                tol: *tol,
                max_iters: 1000,
                ..SolverConfig::default()
            };
            let r = solve(p, &cfg).unwrap();
            let trace_gamma_bad = r.trace.records.iter().filter(|t| !(t.gamma > 0.0 && t.gamma <= 1.0)).count();
            gamma_bad += r.log.gamma_violations + trace_gamma_bad;
            eps_bad += r.log.eps_violations;
            uncertified += r.log.uncertified_solves;
            max_tau_updates = max_tau_updates.max(r.log.tau_updates);
            runs += 1;
        }
    }
    outcome(
        gamma_bad == 0 && eps_bad == 0 && uncertified == 0 && max_tau_updates <= 100,
        format!(
            "{runs} runs: γ violations {gamma_bad}, ε violations {eps_bad}, max τ actions {max_tau_updates} (limit 100), uncertified inner solves {uncertified}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut notes = Vec::new();
    // (sparsity, c̄ multiple of the mean squared column norm, c/c̄, box)
    for (sp, kappa, ratio, b_box) in [(0.01, 1.0, 0.1, 1.0), (0.1, 2.8, 100.0 / 2800.0, 0.1)] {
        let (mut flexa_ok, mut fista_ok, mut sparsa_ok) = (0, 0, 0);
        let mut gaps = Vec::new();
        for seed in 0..10 {
            let p = ncvxqp_analogue(900, 1000, sp, kappa, ratio, b_box, seed).unwrap().into_problem().unwrap();
            let cfg = SolverConfig {
                merit: Merit::ZBar,
                tol: 1e-3,
                max_iters: 20_000,
                ..SolverConfig::default()
            };
            let r = solve(&p, &cfg).unwrap();
            let zbar = |x: &[f64]| p.stationarity_residual(x).unwrap();
            if r.status == Status::Converged && zbar(&r.x) <= 1e-3 {
                flexa_ok += 1;
            }
            let opts = BaselineOptions {
                force_nonconvex: true,
                ..BaselineOptions::new(Merit::ZBar, 1e-3, 20_000)
            };
            let f = fista_solve(&p, &opts).unwrap();
            if f.status == Status::Converged && zbar(&f.x) <= 1e-3 {
                fista_ok += 1;
            }
            let s = sparsa_solve(&p, &opts).unwrap();
            if s.status == Status::Converged && zbar(&s.x) <= 1e-3 {
                sparsa_ok += 1;
            }
            gaps.push(max_abs_diff(&r.x, &f.x).max(max_abs_diff(&r.x, &s.x)));
        }
        pass &= flexa_ok >= 8 && fista_ok >= 8 && sparsa_ok >= 8;
        let same = gaps.iter().filter(|g| **g <= 1e-3).count();
        notes.push(format!(
            "{:.0}%: FLEXA {flexa_ok}/10, FISTA {fista_ok}/10, SpaRSA {sparsa_ok}/10, same point {same}/10",
            sp * 100.0
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass, format!("{}; {secs:.1}s", notes.join("; ")))
}

fn criterion_9() -> Outcome {
    let mut worst = 0.0f64;
    let mut rows_checked = 0;
    let mut notes = Vec::new();
    for (sp, seed) in [(0.1, 0), (0.01, 1)] {
        let inst = nesterov_generate(900, 1000, sp, 1.0, seed).unwrap();
        let rows = dense_rows(&inst.a);
        let l_true = 2.0 * power_iteration_gram(&rows, 5000);
        let opt = inst.known_optimum.clone().unwrap();
        let r0: f64 = opt.x.iter().map(|v| v * v).sum();
        let p = inst.into_problem().unwrap();
        let r = fista_solve(&p, &BaselineOptions::new(Merit::Re, 0.0, 2000)).unwrap();
        for t in &r.trace.records {
            let bound = 2.0 * l_true * r0 / ((t.k + 1) as f64).powi(2);
            worst = worst.max((t.v - opt.value) / bound);
            rows_checked += 1;
        }
        notes.push(format!("L_true {l_true:.3}"));
    }
    outcome(
        worst <= 1.01,
        format!("{rows_checked} iterates, max (V−V*)/bound = {worst:.4} (limit 1.01); {}", notes.join(", ")),
    )
}

fn criterion_10() -> Outcome {
    let mut ok = 0;
    let mut notes = Vec::new();
    for seed in 0..10 {
        let p = lasso_desk(0.01, seed);
        let opt = p.known_optimum.clone().unwrap();
        let support: Vec<bool> = opt.x.iter().map(|v| *v != 0.0).collect();
        let cfg = SolverConfig {
            tol: 1e-10,
            ..SolverConfig::default()
        };
        let mut reached = false;
        let mut checked = 0;
        let mut mismatched = 0;
        solve_observed(&p, &cfg, &mut |v| {
            reached |= v.merit <= 1e-5;
            if reached && !v.discarded {
                checked += 1;
                if v.x.iter().zip(&support).any(|(x, s)| (*x != 0.0) != *s) {
                    mismatched += 1;
                }
            }
        })
        .unwrap();
        if reached && mismatched == 0 {
            ok += 1;
        } else {
            notes.push(format!("seed {seed}: {mismatched}/{checked} iterates off-support"));
        }
    }
    outcome(ok >= 9, format!("{ok}/10 seeds keep supp(x*) after re ≤ 1e-5 {}", notes.join(", ")))
}

fn criterion_11() -> Outcome {
    let p = lasso_desk(0.1, 21);
    let mut all_same = true;
    let mut cases = 0;
    for (algorithm, workers, sigma) in [
        (Algorithm::Flexa, 4, 0.5),
        (Algorithm::Flexa, 3, 0.0),
        (Algorithm::GaussJacobi, 4, 0.0),
        (Algorithm::GjSelection, 2, 0.5),
    ] {
        let cfg = SolverConfig {
            algorithm,
            workers,
            selection: SelectionRule::Threshold(sigma),
            record_wall_time: false,
            ..SolverConfig::default()
        };
        let a = solve(&p, &cfg).unwrap().trace.to_csv();
        let b = solve(&p, &cfg).unwrap().trace.to_csv();
        all_same &= a == b;
        cases += 1;
    }
    for fista in [true, false] {
        let opts = BaselineOptions {
            record_wall_time: false,
            ..BaselineOptions::new(Merit::Re, 1e-6, 5000)
        };
        let run = || if fista { fista_solve(&p, &opts) } else { sparsa_solve(&p, &opts) };
        all_same &= run().unwrap().trace.to_csv() == run().unwrap().trace.to_csv();
        cases += 1;
    }
    outcome(all_same, format!("{cases} configurations, byte-identical traces: {all_same}"))
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "subproblem oracle equivalence", criterion_1),
        (2, "descent inequality", criterion_2),
        (3, "fixed point and stationarity of generated optima", criterion_3),
        (4, "gradient correctness", criterion_4),
        (5, "convex end-to-end convergence", criterion_5),
        (6, "scheme equivalences", criterion_6),
        (7, "hypothesis enforcement", criterion_7),
        (8, "nonconvex termination", criterion_8),
        (9, "FISTA rate", criterion_9),
        (10, "support identification", criterion_10),
        (11, "reproducibility", criterion_11),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        println!(
            "criterion {id:>2} {:<4} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
