//! Real matrix kernel used by encoding, decoding and the rank experiments.

mod dense;
mod qr;
mod sparse;
mod svd;
mod triples;

use alloc::vec::Vec;

pub use dense::DenseMatrix;
pub use qr::PivotedQr;
pub use sparse::{SparseMatrix, ZERO_CUTOFF};
pub use svd::singular_values;
pub use triples::{format_triples, parse_triples};

use crate::{Error, Result};

/// Above this fraction of nonzeros a matrix is stored densely.
pub const DENSE_THRESHOLD: f64 = 0.5;

/// Either storage format. Coded blocks pick whichever is cheaper.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(SparseMatrix),
}

impl Matrix {
    /// Stores `dense` sparsely when at most half of its entries are nonzero.
    pub fn compact(dense: DenseMatrix) -> Matrix {
        let total = dense.rows() * dense.cols();
        if total > 0 && (dense.nnz() as f64) <= DENSE_THRESHOLD * total as f64 {
            Matrix::Sparse(SparseMatrix::from_dense(&dense))
        } else {
            Matrix::Dense(dense)
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

    pub fn shape(&self) -> (usize, usize) {
        (self.rows(), self.cols())
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(d) => d.nnz(),
            Matrix::Sparse(s) => s.nnz(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(d) => d.clone(),
            Matrix::Sparse(s) => s.to_dense(),
        }
    }

    /// Calls `f(col, value)` for every stored nonzero of row `i`, in
    /// ascending column order.
    fn for_each_in_row(&self, i: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Matrix::Dense(d) => {
                for (j, &v) in d.row(i).iter().enumerate() {
                    if v != 0.0 {
                        f(j, v);
                    }
                }
            }
            Matrix::Sparse(s) => {
                for &(_, j, v) in s.row_entries(i) {
                    f(j, v);
                }
            }
        }
    }

    fn row_nnz(&self, i: usize) -> usize {
        match self {
            Matrix::Dense(d) => d.row(i).iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse(s) => s.row_entries(i).len(),
        }
    }
}

impl From<DenseMatrix> for Matrix {
    fn from(d: DenseMatrix) -> Self {
        Matrix::Dense(d)
    }
}

impl From<SparseMatrix> for Matrix {
    fn from(s: SparseMatrix) -> Self {
        Matrix::Sparse(s)
    }
}

/// `aᵀ·b`, with each entry accumulated over the shared row index in
/// ascending order.
pub fn matmul_transpose_left(a: &Matrix, b: &Matrix) -> Result<DenseMatrix> {
    matmul_transpose_left_counted(a, b).map(|(c, _)| c)
}

/// [`matmul_transpose_left`] that also returns the number of scalar
/// multiply-adds performed: `Σ_k nnz(a row k)·nnz(b row k)`.
pub fn matmul_transpose_left_counted(a: &Matrix, b: &Matrix) -> Result<(DenseMatrix, u64)> {
    if a.rows() != b.rows() {
        return Err(Error::Shape {
            op: "matmul_transpose_left",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut out = DenseMatrix::zeros(a.cols(), b.cols());
    let mut flops = 0u64;
    let mut b_row: Vec<(usize, f64)> = Vec::with_capacity(b.cols());
    for k in 0..a.rows() {
        b_row.clear();
        b.for_each_in_row(k, |j, v| b_row.push((j, v)));
        if b_row.is_empty() {
            continue;
        }
        let cols = out.cols();
        let data = out.as_mut_slice();
        a.for_each_in_row(k, |i, av| {
            let row = &mut data[i * cols..(i + 1) * cols];
            for &(j, bv) in &b_row {
                row[j] += av * bv;
            }
            flops += b_row.len() as u64;
        });
    }
    Ok((out, flops))
}

/// Number of multiply-adds [`matmul_transpose_left_counted`] would perform.
pub fn transpose_left_flops(a: &Matrix, b: &Matrix) -> u64 {
    (0..a.rows().min(b.rows()))
        .map(|k| (a.row_nnz(k) * b.row_nnz(k)) as u64)
        .sum()
}

/// Cutoff for counting a singular value as nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance {
    /// `max(rows, cols)·σ_max·ε`, the usual pseudo-inverse cutoff.
    #[default]
    Default,
    Absolute(f64),
}

impl RankTolerance {
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankTolerance::Default => rows.max(cols) as f64 * sigma_max * f64::EPSILON,
            RankTolerance::Absolute(tau) => tau,
        }
    }
}

/// Number of singular values above the tolerance.
pub fn numerical_rank(g: &DenseMatrix, tol: RankTolerance) -> Result<usize> {
    if g.rows() == 0 || g.cols() == 0 {
        return Err(Error::param("g", "matrix is empty"));
    }
    let sv = singular_values(g)?;
    let tau = tol.threshold(g.rows(), g.cols(), sv[0]);
    Ok(sv.iter().filter(|&&s| s > tau).count())
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Least-squares solve of `g·z = y` for every column of `y`.
///
/// Checks full column rank with the SVD first; a deficient `g` yields
/// [`Error::RankDeficient`].
pub fn least_squares_solve(g: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    if g.rows() != y.rows() {
        return Err(Error::Shape {
            op: "least_squares_solve",
            left: g.shape(),
            right: y.shape(),
        });
    }
    let rank = numerical_rank(g, RankTolerance::Default)?;
    if rank < g.cols() {
        return Err(Error::RankDeficient {
            rank,
            required: g.cols(),
        });
    }
    PivotedQr::new(g)?.solve(y)
}

/// True iff some column has only exact zeros.
pub fn has_zero_column(g: &Matrix) -> bool {
    match g {
        Matrix::Dense(d) => dense_has_zero_column(d),
        Matrix::Sparse(s) => {
            let mut seen = alloc::vec![false; s.cols()];
            for &(_, j, _) in s.entries() {
                seen[j] = true;
            }
            seen.iter().any(|hit| !hit)
        }
    }
}

pub fn dense_has_zero_column(d: &DenseMatrix) -> bool {
    let mut seen = alloc::vec![false; d.cols()];
    for i in 0..d.rows() {
        for (j, &v) in d.row(i).iter().enumerate() {
            if v != 0.0 {
                seen[j] = true;
            }
        }
    }
    seen.iter().any(|hit| !hit)
}
