//! LASSO instances with a planted optimum of prescribed sparsity.
//!
//! Construction: draw a dual vector `y*` and a raw matrix `B`, then rescale
//! every column so that `2|a_jᵀy*| = c` on the chosen support and
//! `2|a_jᵀy*| ≤ 0.9c` off it. With `b = Ax* + y*` and `sign(x*_j) =
//! sign(a_jᵀy*)` the point `x*` satisfies `0 ∈ ∂V(x*)`, which is checked
//! before the instance is returned.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LassoInstance, NcvxQpInstance};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Matrix};
use crate::model::KNOWN_OPTIMUM_TOL;

/// Off-support columns keep `2|a_jᵀy*| / c` at or below this ratio.
const OFF_SUPPORT_RATIO: f64 = 0.9;
/// Support columns are redrawn while `|b_jᵀy*|` is below this multiple of its
/// standard deviation, which bounds the column rescaling factor.
const MIN_CORRELATION: f64 = 0.25;

fn validate(m: usize, n: usize, sparsity: f64, c: f64) -> Result<usize> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("m and n must be positive".into()));
    }
    if !(sparsity > 0.0 && sparsity <= 1.0) {
        return Err(Error::InvalidArgument(format!("sparsity must be in (0, 1], got {sparsity}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("c must be positive, got {c}")));
    }
    Ok(((sparsity * n as f64).round() as usize).clamp(1, n))
}

/// Generates `min ‖Ax − b‖² + c‖x‖₁` with known `(x*, V*)`.
pub fn nesterov_generate(m: usize, n: usize, sparsity: f64, c: f64, seed: u64) -> Result<LassoInstance> {
    let k = validate(m, n, sparsity, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let dual: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let entry_scale = 1.0 / (m as f64).sqrt();
    let corr_std = linalg::norm2(&dual) * entry_scale / 3f64.sqrt();

    let mut on_support = vec![false; n];
    for j in sample(&mut rng, n, k).into_iter() {
        on_support[j] = true;
    }

    let mut a = DenseMatrix::zeros(m, n);
    let mut x_star = vec![0.0; n];
    for j in 0..n {
        let mut corr;
        let mut tries = 0;
        loop {
            let col = a.col_mut(j);
            for v in col.iter_mut() {
                *v = rng.gen_range(-1.0..1.0) * entry_scale;
            }
            corr = linalg::dot(a.col(j), &dual);
            tries += 1;
            if !on_support[j] || corr.abs() >= MIN_CORRELATION * corr_std || tries >= 100 {
                break;
            }
        }
        if corr == 0.0 {
            return Err(Error::Generation(format!("column {j} is orthogonal to the dual vector")));
        }
        let scale = if on_support[j] {
            x_star[j] = corr.signum() * rng.gen_range(0.1..1.0);
            c / (2.0 * corr.abs())
        } else if 2.0 * corr.abs() > OFF_SUPPORT_RATIO * c {
            rng.gen_range(0.1..OFF_SUPPORT_RATIO) * c / (2.0 * corr.abs())
        } else {
            1.0
        };
        a.col_mut(j).iter_mut().for_each(|v| *v *= scale);
    }

    let a = Matrix::Dense(a);
    let mut b = a.matvec(&x_star);
    for (bi, yi) in b.iter_mut().zip(&dual) {
        *bi += yi;
    }
    let inst = LassoInstance::new(a, b, c)?;
    let violation = verify_lasso_optimum(&inst, &x_star)?;
    if violation > KNOWN_OPTIMUM_TOL {
        return Err(Error::Generation(format!(
            "planted optimum fails the subgradient check by {violation:e} (seed {seed})"
        )));
    }
    let r = inst.a.matvec(&x_star);
    let resid: Vec<f64> = r.iter().zip(&inst.b).map(|(u, v)| u - v).collect();
    let value = linalg::dot(&resid, &resid) + c * x_star.iter().map(|v| v.abs()).sum::<f64>();
    Ok(inst.with_optimum(x_star, value))
}

/// Maximum violation of `0 ∈ 2Aᵀ(Ax − b) + c∂‖x‖₁`, coordinate by coordinate.
pub fn verify_lasso_optimum(inst: &LassoInstance, x: &[f64]) -> Result<f64> {
    if x.len() != inst.dim() {
        return Err(Error::Dimension {
            what: "candidate optimum",
            expected: inst.dim(),
            got: x.len(),
        });
    }
    let mut r = inst.a.matvec(x);
    for (ri, bi) in r.iter_mut().zip(&inst.b) {
        *ri -= bi;
    }
    let mut worst = 0.0f64;
    for (j, &xj) in x.iter().enumerate() {
        let g = 2.0 * inst.a.col_dot(j, &r);
        let v = if xj != 0.0 {
            (g + inst.c * xj.signum()).abs()
        } else {
            (g.abs() - inst.c).max(0.0)
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Nonconvex box QP built on a planted LASSO matrix.
#[allow(clippy::too_many_arguments)]
pub fn ncvxqp_generate(
    m: usize,
    n: usize,
    sparsity: f64,
    c: f64,
    cbar: f64,
    b_box: f64,
    seed: u64,
) -> Result<NcvxQpInstance> {
    let lasso = nesterov_generate(m, n, sparsity, c, seed)?;
    NcvxQpInstance::new(lasso.a, lasso.b, c, cbar, b_box)
}

/// Desk-scale nonconvex box QP: the planted LASSO matrix generated with
/// `c = 1`, then `c̄ = kappa · mean_j ‖a_j‖²` and `c = c_ratio · c̄`.
pub fn ncvxqp_analogue(
    m: usize,
    n: usize,
    sparsity: f64,
    kappa: f64,
    c_ratio: f64,
    b_box: f64,
    seed: u64,
) -> Result<NcvxQpInstance> {
    if !(kappa > 0.0 && c_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa and c_ratio must be positive, got {kappa} and {c_ratio}")));
    }
    let lasso = nesterov_generate(m, n, sparsity, 1.0, seed)?;
    let cbar = kappa * linalg::sum(&lasso.column_sq_norms) / n as f64;
    NcvxQpInstance::new(lasso.a, lasso.b, c_ratio * cbar, cbar, b_box)
}
