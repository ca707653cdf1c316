//! Small dense/sparse kernels used by the backends.
//!
//! Every reduction here runs in a fixed order that does not depend on how the
//! work is split across threads, so results are reproducible bit-for-bit for
//! any worker count.

use rayon::prelude::*;

/// Leaf size of the pairwise summation tree.
const PAIRWISE_LEAF: usize = 32;

/// Rows handled per parallel task when updating an m-vector.
const ROW_CHUNK: usize = 512;

/// Dot product with fixed-order pairwise summation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_LEAF {
        let mut acc = [0.0f64; 4];
        let chunks = a.len() / 4;
        for c in 0..chunks {
            for l in 0..4 {
                acc[l] += a[4 * c + l] * b[4 * c + l];
            }
        }
        let mut tail = 0.0;
        for i in 4 * chunks..a.len() {
            tail += a[i] * b[i];
        }
        return (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
    }
    let mid = a.len() / 2;
    dot(&a[..mid], &b[..mid]) + dot(&a[mid..], &b[mid..])
}

/// Pairwise sum of a slice.
pub fn sum(a: &[f64]) -> f64 {
    if a.len() <= PAIRWISE_LEAF {
        return a.iter().sum();
    }
    let mid = a.len() / 2;
    sum(&a[..mid]) + sum(&a[mid..])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense storage length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut out = Self::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                out.data[j * m + i] = *v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        let m = self.rows;
        &mut self.data[j * m..(j + 1) * m]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }
}

/// Compressed sparse column matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// Compressed sparse row matrix. Used for ingestion and on-disk storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Checks the structural invariants of the triple.
    pub fn validate(&self) -> Result<(), String> {
        if self.indptr.len() != self.rows + 1 {
            return Err(format!(
                "indptr has {} entries, expected {}",
                self.indptr.len(),
                self.rows + 1
            ));
        }
        if self.indptr[0] != 0 || *self.indptr.last().unwrap() != self.indices.len() {
            return Err("indptr does not span the index array".into());
        }
        if self.indices.len() != self.data.len() {
            return Err("indices and data differ in length".into());
        }
        if self.indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err("indptr is not monotone".into());
        }
        if let Some(&j) = self.indices.iter().find(|&&j| j >= self.cols) {
            return Err(format!("column index {j} out of range for {} columns", self.cols));
        }
        Ok(())
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn to_csc(&self) -> CscMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[p];
                let dst = next[j];
                indices[dst] = i;
                data[dst] = self.data[p];
                next[j] += 1;
            }
        }
        CscMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.data[self.indices[p] * self.rows + i] += self.data[p];
            }
        }
        out
    }
}

impl CscMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[j]..self.indptr[j + 1];
        (&self.indices[r.clone()], &self.data[r])
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.rows + 1];
        for &i in &self.indices {
            counts[i + 1] += 1;
        }
        for i in 0..self.rows {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for j in 0..self.cols {
            for p in self.indptr[j]..self.indptr[j + 1] {
                let i = self.indices[p];
                indices[next[i]] = j;
                data[next[i]] = self.data[p];
                next[i] += 1;
            }
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            data,
        }
    }
}

/// Data matrix in whichever storage suits its density.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(CscMatrix),
}

/// Density below which generated or loaded matrices are stored sparse.
pub const SPARSE_DENSITY_THRESHOLD: f64 = 0.05;

impl Matrix {
    /// Picks dense or sparse storage from the fill ratio.
    pub fn from_csr(csr: &CsrMatrix) -> Self {
        let cells = (csr.rows * csr.cols).max(1) as f64;
        if (csr.nnz() as f64) / cells < SPARSE_DENSITY_THRESHOLD {
            Matrix::Sparse(csr.to_csc())
        } else {
            Matrix::Dense(csr.to_dense())
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.rows(),
            Matrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.cols(),
            Matrix::Sparse(s) => s.cols(),
        }
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        match self {
            Matrix::Dense(d) => d.rows(),
            Matrix::Sparse(s) => s.indptr[j + 1] - s.indptr[j],
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.rows() * d.cols(),
            Matrix::Sparse(s) => s.nnz(),
        }
    }

    /// `a_jᵀ v`.
    pub fn col_dot(&self, j: usize, v: &[f64]) -> f64 {
        match self {
            Matrix::Dense(d) => dot(d.col(j), v),
            Matrix::Sparse(s) => {
                let (idx, val) = s.col(j);
                idx.iter().zip(val).map(|(&i, &a)| a * v[i]).sum()
            }
        }
    }

    /// `v += alpha a_j`.
    pub fn col_axpy(&self, j: usize, alpha: f64, v: &mut [f64]) {
        match self {
            Matrix::Dense(d) => {
                for (vi, a) in v.iter_mut().zip(d.col(j)) {
                    *vi += alpha * a;
                }
            }
            Matrix::Sparse(s) => {
                let (idx, val) = s.col(j);
                for (&i, &a) in idx.iter().zip(val) {
                    v[i] += alpha * a;
                }
            }
        }
    }

    /// `Σ_i w_i a_ij²`, the weighted squared column norm.
    pub fn col_weighted_sq(&self, j: usize, w: &[f64]) -> f64 {
        match self {
            Matrix::Dense(d) => d.col(j).iter().zip(w).map(|(a, wi)| wi * a * a).sum(),
            Matrix::Sparse(s) => {
                let (idx, val) = s.col(j);
                idx.iter().zip(val).map(|(&i, &a)| w[i] * a * a).sum()
            }
        }
    }

    pub fn col_sq_norm(&self, j: usize) -> f64 {
        match self {
            Matrix::Dense(d) => dot(d.col(j), d.col(j)),
            Matrix::Sparse(s) => s.col(j).1.iter().map(|a| a * a).sum(),
        }
    }

    /// Dense copy of column `j`.
    pub fn col_dense(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.col_axpy(j, 1.0, &mut out);
        out
    }

    /// `A x`, accumulated column by column in ascending column order.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.add_matvec(x, &mut out);
        out
    }

    /// `out += A delta`, skipping zero entries of `delta`. Each output entry
    /// accumulates contributions in ascending column order, independent of how
    /// rows are chunked across threads.
    pub fn add_matvec(&self, delta: &[f64], out: &mut [f64]) {
        let active: Vec<usize> = (0..self.cols()).filter(|&j| delta[j] != 0.0).collect();
        if active.is_empty() {
            return;
        }
        match self {
            Matrix::Dense(d) => {
                let m = d.rows();
                out.par_chunks_mut(ROW_CHUNK)
                    .enumerate()
                    .for_each(|(c, chunk)| {
                        let lo = c * ROW_CHUNK;
                        for &j in &active {
                            let col = &d.as_col_major()[j * m + lo..j * m + lo + chunk.len()];
                            let alpha = delta[j];
                            for (o, a) in chunk.iter_mut().zip(col) {
                                *o += alpha * a;
                            }
                        }
                    });
            }
            Matrix::Sparse(_) => {
                for &j in &active {
                    self.col_axpy(j, delta[j], out);
                }
            }
        }
    }

    /// `Aᵀ v`, one fixed-order dot product per column.
    pub fn rmatvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.cols())
            .into_par_iter()
            .map(|j| self.col_dot(j, v))
            .collect()
    }

    /// Row-major copy of row `i`. Used by tests and small-instance tooling.
    pub fn row_dense(&self, i: usize) -> Vec<f64> {
        (0..self.cols())
            .map(|j| match self {
                Matrix::Dense(d) => d.get(i, j),
                Matrix::Sparse(s) => {
                    let (idx, val) = s.col(j);
                    idx.iter()
                        .position(|&r| r == i)
                        .map_or(0.0, |p| val[p])
                }
            })
            .collect()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        match self {
            Matrix::Sparse(s) => s.to_csr(),
            Matrix::Dense(d) => {
                let mut indptr = vec![0usize];
                let mut indices = Vec::new();
                let mut data = Vec::new();
                for i in 0..d.rows() {
                    for j in 0..d.cols() {
                        let v = d.get(i, j);
                        if v != 0.0 {
                            indices.push(j);
                            data.push(v);
                        }
                    }
                    indptr.push(indices.len());
                }
                CsrMatrix {
                    rows: d.rows(),
                    cols: d.cols(),
                    indptr,
                    indices,
                    data,
                }
            }
        }
    }

    /// Sum of squared entries, `tr(AᵀA)`.
    pub fn frobenius_sq(&self) -> f64 {
        let per_col: Vec<f64> = (0..self.cols()).map(|j| self.col_sq_norm(j)).collect();
        sum(&per_col)
    }

    /// Largest eigenvalue of `AᵀA` by power iteration.
    pub fn gram_spectral_norm(&self, iters: usize, tol: f64) -> f64 {
        let n = self.cols();
        if n == 0 {
            return 0.0;
        }
        // deterministic, non-degenerate start
        let mut v: Vec<f64> = (0..n).map(|j| 1.0 + 0.1 * ((j * 7919) % 13) as f64).collect();
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let mut lambda = 0.0;
        for _ in 0..iters {
            let av = self.matvec(&v);
            let mut w = self.rmatvec(&av);
            let next = norm2(&w);
            if next == 0.0 {
                return 0.0;
            }
            w.iter_mut().for_each(|x| *x /= next);
            v = w;
            if (next - lambda).abs() <= tol * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DenseMatrix {
        DenseMatrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]])
    }

    #[test]
    fn pairwise_dot_matches_naive() {
        let a: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.11).cos()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-10);
    }

    #[test]
    fn dense_sparse_agree() {
        let d = sample();
        let csr = Matrix::Dense(d.clone()).to_csr();
        assert_eq!(csr.nnz(), 3);
        let s = Matrix::Sparse(csr.to_csc());
        let x = [1.0, -1.0, 0.5];
        assert_eq!(Matrix::Dense(d.clone()).matvec(&x), s.matvec(&x));
        assert_eq!(Matrix::Dense(d).rmatvec(&[2.0, 1.0]), s.rmatvec(&[2.0, 1.0]));
        assert_eq!(s.to_csr(), csr);
    }

    #[test]
    fn csr_validation_catches_bad_index() {
        let csr = CsrMatrix {
            rows: 1,
            cols: 2,
            indptr: vec![0, 1],
            indices: vec![2],
            data: vec![1.0],
        };
        assert!(csr.validate().is_err());
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        let l = Matrix::Dense(d).gram_spectral_norm(500, 1e-14);
        assert!((l - 9.0).abs() < 1e-9);
    }
}
