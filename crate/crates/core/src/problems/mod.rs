//! Concrete backends: (group) LASSO, sparse logistic regression and the
//! nonconvex box-constrained QP, plus instance generation and file formats.

mod generator;
pub mod io;
pub mod libsvm;
mod logistic;
mod quadratic;

use std::sync::Arc;

pub use generator::{ncvxqp_analogue, ncvxqp_generate, nesterov_generate, verify_lasso_optimum};
pub use logistic::{sigmoid_neg, softplus_neg, LogisticLoss};
pub use quadratic::QuadraticLoss;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, Matrix};
use crate::model::{BlockStructure, FeasibleSet, KnownOptimum, ProblemInstance, Regularizer};

fn check_rhs(a: &Matrix, b: &[f64]) -> Result<()> {
    if a.rows() != b.len() {
        return Err(Error::Dimension {
            what: "right-hand side",
            expected: a.rows(),
            got: b.len(),
        });
    }
    Ok(())
}

fn check_weight(c: f64) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("regularization weight must be finite and >= 0, got {c}")));
    }
    Ok(())
}

/// `min ‖Ax − b‖² + c‖x‖₁`.
#[derive(Debug, Clone)]
pub struct LassoInstance {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub column_sq_norms: Vec<f64>,
    pub known_optimum: Option<KnownOptimum>,
}

impl LassoInstance {
    pub fn new(a: Matrix, b: Vec<f64>, c: f64) -> Result<Self> {
        check_rhs(&a, &b)?;
        check_weight(c)?;
        let column_sq_norms = (0..a.cols()).map(|j| a.col_sq_norm(j)).collect();
        Ok(Self {
            a,
            b,
            c,
            column_sq_norms,
            known_optimum: None,
        })
    }

    /// From a row-major dense matrix.
    pub fn dense(rows: Vec<Vec<f64>>, b: Vec<f64>, c: f64) -> Result<Self> {
        Self::new(Matrix::Dense(DenseMatrix::from_rows(&rows)), b, c)
    }

    pub fn with_optimum(mut self, x: Vec<f64>, value: f64) -> Self {
        self.known_optimum = Some(KnownOptimum { x, value });
        self
    }

    pub fn dim(&self) -> usize {
        self.a.cols()
    }

    pub fn into_problem(self) -> Result<ProblemInstance> {
        let n = self.dim();
        ProblemInstance::new(
            Arc::new(QuadraticLoss::new(self.a, self.b, 0.0)),
            Regularizer::l1(self.c),
            BlockStructure::scalar(n),
            FeasibleSet::unbounded(n),
            self.known_optimum,
        )
    }
}

/// `min ‖Ax − b‖² + c Σ_i ‖x_i‖₂` over the given blocks.
#[derive(Debug, Clone)]
pub struct GroupLassoInstance {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub blocks: BlockStructure,
}

impl GroupLassoInstance {
    pub fn new(a: Matrix, b: Vec<f64>, c: f64, blocks: BlockStructure) -> Result<Self> {
        check_rhs(&a, &b)?;
        check_weight(c)?;
        if blocks.dim() != a.cols() {
            return Err(Error::Dimension {
                what: "block structure",
                expected: a.cols(),
                got: blocks.dim(),
            });
        }
        Ok(Self { a, b, c, blocks })
    }

    pub fn into_problem(self) -> Result<ProblemInstance> {
        let n = self.a.cols();
        ProblemInstance::new(
            Arc::new(QuadraticLoss::new(self.a, self.b, 0.0)),
            Regularizer::group_l2(self.c),
            self.blocks,
            FeasibleSet::unbounded(n),
            None,
        )
    }
}

/// `min ‖Ax − b‖² − c̄‖x‖² + c‖x‖₁` subject to `−b_box ≤ x ≤ b_box`.
#[derive(Debug, Clone)]
pub struct NcvxQpInstance {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: f64,
    pub cbar: f64,
    pub b_box: f64,
}

impl NcvxQpInstance {
    pub fn new(a: Matrix, b: Vec<f64>, c: f64, cbar: f64, b_box: f64) -> Result<Self> {
        check_rhs(&a, &b)?;
        check_weight(c)?;
        if !(cbar > 0.0) {
            return Err(Error::InvalidArgument(format!("cbar must be positive, got {cbar}")));
        }
        if !(b_box > 0.0) || !b_box.is_finite() {
            return Err(Error::InvalidArgument(format!("box bound must be positive and finite, got {b_box}")));
        }
        Ok(Self { a, b, c, cbar, b_box })
    }

    pub fn into_problem(self) -> Result<ProblemInstance> {
        let n = self.a.cols();
        ProblemInstance::new(
            Arc::new(QuadraticLoss::new(self.a, self.b, self.cbar)),
            Regularizer::l1(self.c),
            BlockStructure::scalar(n),
            FeasibleSet::symmetric_box(n, self.b_box)?,
            None,
        )
    }
}

/// `min Σ_j log(1 + exp(−a_j y_jᵀx)) + c‖x‖₁`.
#[derive(Debug, Clone)]
pub struct LogisticInstance {
    /// Feature matrix with rows `y_jᵀ`.
    pub y: Matrix,
    /// Labels in `{−1, +1}`.
    pub labels: Vec<f64>,
    pub c: f64,
}

impl LogisticInstance {
    pub fn new(y: Matrix, labels: Vec<f64>, c: f64) -> Result<Self> {
        check_rhs(&y, &labels)?;
        check_weight(c)?;
        if let Some(bad) = labels.iter().find(|l| **l != 1.0 && **l != -1.0) {
            return Err(Error::Data(format!("label {bad} is not in {{-1, +1}}")));
        }
        Ok(Self { y, labels, c })
    }

    /// `diag(a) Y`.
    pub fn signed_design(&self) -> Matrix {
        let mut csr = self.y.to_csr();
        for i in 0..csr.rows {
            for p in csr.indptr[i]..csr.indptr[i + 1] {
                csr.data[p] *= self.labels[i];
            }
        }
        match &self.y {
            Matrix::Dense(_) => Matrix::Dense(csr.to_dense()),
            Matrix::Sparse(_) => Matrix::Sparse(csr.to_csc()),
        }
    }

    pub fn into_problem(self) -> Result<ProblemInstance> {
        let n = self.y.cols();
        let signed = self.signed_design();
        ProblemInstance::new(
            Arc::new(LogisticLoss::from_signed(signed)),
            Regularizer::l1(self.c),
            BlockStructure::scalar(n),
            FeasibleSet::unbounded(n),
            None,
        )
    }
}

/// Any of the supported backends, as stored on disk.
#[derive(Debug, Clone)]
pub enum Instance {
    Lasso(LassoInstance),
    GroupLasso(GroupLassoInstance),
    NcvxQp(NcvxQpInstance),
    Logistic(LogisticInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Lasso(_) => "lasso",
            Instance::GroupLasso(_) => "group_lasso",
            Instance::NcvxQp(_) => "ncvxqp",
            Instance::Logistic(_) => "logistic",
        }
    }

    pub fn into_problem(self) -> Result<ProblemInstance> {
        match self {
            Instance::Lasso(i) => i.into_problem(),
            Instance::GroupLasso(i) => i.into_problem(),
            Instance::NcvxQp(i) => i.into_problem(),
            Instance::Logistic(i) => i.into_problem(),
        }
    }
}
