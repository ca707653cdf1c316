mod common;

use common::*;
use flexa::linalg::{CsrMatrix, DenseMatrix, Matrix};
use flexa::model::soft_threshold;
use flexa::problems::libsvm::{parse_libsvm, write_libsvm};
use flexa::problems::{ncvxqp_generate, nesterov_generate, LogisticInstance};
use flexa::subprob::best_response_full;
use flexa::{ApproximationKind, Regularizer};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn objective_matches_naive_evaluation() {
    for &backend in &BACKENDS {
        for seed in 0..20 {
            let raw = Raw::random(backend, 12, 7, seed);
            let p = raw.problem();
            let mut r = rng(seed + 100);
            for _ in 0..5 {
                let x = raw.random_point(&mut r, 3.0);
                let v = p.eval_v(&x).unwrap();
                let want = raw.v(&x);
                assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0), "{backend:?}: {v} vs {want}");
            }
        }
    }
}

#[test]
fn value_at_generated_optimum() {
    for seed in 0..5 {
        let inst = nesterov_generate(45, 50, 0.1, 1.0, seed).unwrap();
        let opt = inst.known_optimum.clone().unwrap();
        let p = inst.into_problem().unwrap();
        let v = p.eval_v(&opt.x).unwrap();
        assert!((v - opt.value).abs() <= 1e-10 * opt.value.abs());
    }
}

#[test]
fn logistic_is_finite_at_extreme_margins() {
    let raw = Raw::random(Backend::Logistic, 20, 5, 3);
    let p = raw.problem();
    let mut r = rng(4);
    for scale in [1e2, 1e3, 1e4, 1e5] {
        let x: Vec<f64> = raw.random_point(&mut r, 1.0).iter().map(|v| v * scale).collect();
        let v = p.eval_v(&x).unwrap();
        assert!(v.is_finite());
        assert!(p.oracle.full_grad(&x).iter().all(|g| g.is_finite()));
        assert!((v - raw.v(&x)).abs() <= 1e-10 * v.abs().max(1.0));
    }
}

#[test]
fn stationarity_iff_fixed_point() {
    let kind = ApproximationKind::ExactBlock;
    let mut seen_stationary = 0;
    for seed in 0..10 {
        let inst = nesterov_generate(18, 20, 0.2, 1.0, seed).unwrap();
        let xstar = inst.known_optimum.clone().unwrap().x;
        let p = inst.into_problem().unwrap();
        let n = p.dim();
        let tau = vec![p.oracle.trace_tau(); n];
        let eps = vec![0.0; n];
        let mut r = rng(seed);
        let mut points = vec![xstar.clone()];
        for _ in 0..20 {
            points.push((0..n).map(|_| if r.gen_bool(0.5) { 0.0 } else { r.gen_range(-1.0..1.0) }).collect());
        }
        for x in points {
            let res = p.stationarity_residual(&x).unwrap();
            let (xhat, _) = best_response_full(&p, kind, &x, &tau, &eps).unwrap();
            let moved = max_abs_diff(&xhat, &x);
            assert_eq!(res <= 1e-10, moved <= 1e-10, "residual {res:e}, fixed-point gap {moved:e}");
            if res <= 1e-10 {
                seen_stationary += 1;
            }
        }
    }
    assert!(seen_stationary >= 10);
}

#[test]
fn ncvx_stationary_points_are_fixed_points() {
    // Box corners, where stationarity reduces to a sign check on the naive gradient.
    let raw = Raw::random(Backend::Ncvx, 10, 6, 11);
    let p = raw.problem();
    let (lo, hi) = raw.bounds();
    let mut r = rng(12);
    let tau = vec![raw.cbar + 1.0; 6];
    for _ in 0..50 {
        let x: Vec<f64> = (0..6).map(|_| if r.gen_bool(0.5) { lo } else { hi }).collect();
        let g = raw.grad(&x);
        let naive_stationary = x.iter().zip(&g).all(|(xi, gi)| {
            let s = xi.signum();
            -s * (gi + raw.c * s) >= 0.0
        });
        let (xhat, _) = best_response_full(&p, ApproximationKind::ExactBlock, &x, &tau, &[0.0; 6]).unwrap();
        let fixed = max_abs_diff(&xhat, &x) <= 1e-12;
        let res = p.stationarity_residual(&x).unwrap();
        assert_eq!(naive_stationary, fixed);
        assert_eq!(fixed, res <= 1e-12);
    }
}

proptest! {
    #[test]
    fn l1_box_prox_is_optimal(
        v in prop::collection::vec(-5.0f64..5.0, 1..6),
        w in prop::collection::vec(0.1f64..10.0, 6),
        c in 0.0f64..3.0,
        b in 0.1f64..4.0,
    ) {
        let n = v.len();
        let w = &w[..n];
        let lo = vec![-b; n];
        let hi = vec![b; n];
        let reg = Regularizer::l1(c);
        let z = reg.weighted_prox(&v, w, &lo, &hi);
        for j in 0..n {
            prop_assert!(z[j] >= -b && z[j] <= b);
            // Reference: clip the soft threshold.
            let want = soft_threshold(v[j], c / w[j]).clamp(-b, b);
            prop_assert!((z[j] - want).abs() <= 1e-12);
            // Subgradient optimality of w/2 (t − v)² + c|t| over [−b, b].
            let smooth = w[j] * (z[j] - v[j]);
            let residual = if z[j] > -b && z[j] < b {
                if z[j] != 0.0 { (smooth + c * z[j].signum()).abs() } else { (smooth.abs() - c).max(0.0) }
            } else if z[j] >= b {
                (smooth + c).max(0.0)
            } else {
                (-(smooth - c)).max(0.0)
            };
            prop_assert!(residual <= 1e-10, "residual {residual}");
        }
    }

    #[test]
    fn group_prox_is_optimal(v in prop::collection::vec(-5.0f64..5.0, 1..6), w in 0.1f64..10.0, c in 0.0f64..10.0) {
        let n = v.len();
        let reg = Regularizer::group_l2(c);
        let inf = vec![f64::INFINITY; n];
        let ninf = vec![f64::NEG_INFINITY; n];
        let z = reg.weighted_prox(&v, &vec![w; n], &ninf, &inf);
        let nz: f64 = z.iter().map(|t| t * t).sum::<f64>().sqrt();
        let smooth: Vec<f64> = z.iter().zip(&v).map(|(a, b)| w * (a - b)).collect();
        let residual = if nz > 0.0 {
            smooth.iter().zip(&z).map(|(s, t)| (s + c * t / nz).abs()).fold(0.0, f64::max)
        } else {
            (smooth.iter().map(|s| s * s).sum::<f64>().sqrt() - c).max(0.0)
        };
        prop_assert!(residual <= 1e-10, "residual {residual}");
    }
}

#[test]
fn libsvm_round_trip() {
    let mut r = rng(21);
    let (m, n) = (40, 30);
    let mut indptr = vec![0];
    let mut indices = Vec::new();
    let mut data = Vec::new();
    for _ in 0..m {
        for j in 0..n {
            if r.gen_bool(0.2) {
                indices.push(j);
                data.push(r.gen_range(-1e3..1e3) * 10f64.powi(r.gen_range(-8..8)));
            }
        }
        indptr.push(indices.len());
    }
    // Keep the last column present so the parsed width matches.
    indices.push(n - 1);
    data.push(0.5);
    *indptr.last_mut().unwrap() += 1;
    let csr = CsrMatrix {
        rows: m,
        cols: n,
        indptr,
        indices,
        data,
    };
    csr.validate().unwrap();
    let labels: Vec<f64> = (0..m).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let inst = LogisticInstance::new(Matrix::from_csr(&csr), labels.clone(), 0.25).unwrap();
    let mut buf = Vec::new();
    write_libsvm(&inst, &mut buf).unwrap();
    let (back, back_labels) = parse_libsvm(&buf[..]).unwrap();
    assert_eq!(back_labels, labels);
    assert_eq!(back.indptr, csr.indptr);
    assert_eq!(back.indices, csr.indices);
    for (a, b) in back.data.iter().zip(&csr.data) {
        assert!((a - b).abs() <= 1e-15 * b.abs());
    }
}

#[test]
fn incremental_cache_tracks_recomputation() {
    let mut cases = vec![
        Raw::random(Backend::Lasso, 30, 20, 31).problem(),
        Raw::random(Backend::Logistic, 30, 20, 32).problem(),
        Raw::random(Backend::Ncvx, 30, 20, 33).problem(),
    ];
    cases.push(ncvxqp_generate(30, 40, 0.1, 1.0, 1.0, 2.0, 34).unwrap().into_problem().unwrap());
    for p in cases {
        let n = p.dim();
        let mut r = rng(35);
        let mut x = vec![0.0; n];
        let mut state = p.oracle.init_state(&x);
        for step in 0..500 {
            let i = r.gen_range(0..p.num_blocks());
            let range = p.blocks.range(i);
            let delta: Vec<f64> = range.clone().map(|_| r.gen_range(-0.1..0.1)).collect();
            if step % 2 == 0 {
                p.oracle.apply_block_delta(&mut state, range.clone(), &delta);
            } else {
                let mut full = vec![0.0; n];
                full[range.clone()].copy_from_slice(&delta);
                p.oracle.apply_delta(&mut state, &full);
            }
            for (xj, d) in x[range].iter_mut().zip(&delta) {
                *xj += d;
            }
        }
        let fresh = p.oracle.init_state(&x);
        assert!(max_abs_diff(&state, &fresh) <= 1e-10, "{}", p.oracle.name());
    }
}

#[test]
fn dense_and_sparse_instances_agree() {
    let raw = Raw::random(Backend::Lasso, 15, 10, 41);
    let dense = raw.problem();
    let csr = Matrix::Dense(DenseMatrix::from_rows(&raw.rows)).to_csr();
    let sparse = flexa::problems::LassoInstance::new(Matrix::Sparse(csr.to_csc()), raw.rhs.clone(), raw.c)
        .unwrap()
        .into_problem()
        .unwrap();
    let mut r = rng(42);
    let x = raw.random_point(&mut r, 1.0);
    assert!((dense.eval_v(&x).unwrap() - sparse.eval_v(&x).unwrap()).abs() <= 1e-12 * dense.eval_v(&x).unwrap());
    assert!(max_abs_diff(&dense.oracle.full_grad(&x), &sparse.oracle.full_grad(&x)) <= 1e-12);
}
