use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::{Error, Result};

/// Magnitudes below this are not stored as entries.
pub const ZERO_CUTOFF: f64 = 1e-300;

/// Coordinate-list sparse matrix. Entries are unique, sorted row-major, and
/// all nonzero; a row pointer gives constant-time access to each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    row_ptr: Vec<usize>,
}

impl SparseMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
            row_ptr: vec![0; rows + 1],
        }
    }

    /// Builds from triplets in any order. Duplicate coordinates and
    /// out-of-range indices are errors; entries with `|v| < 1e-300` are
    /// dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return Err(Error::param(
                    "entries",
                    format!("coordinate ({i}, {j}) outside {rows}x{cols}"),
                ));
            }
            if !v.is_finite() {
                return Err(Error::param(
                    "entries",
                    format!("non-finite value at ({i}, {j})"),
                ));
            }
        }
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        if let Some(w) = triplets
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::param(
                "entries",
                format!("duplicate coordinate ({}, {})", w[0].0, w[0].1),
            ));
        }
        triplets.retain(|t| t.2.abs() >= ZERO_CUTOFF);
        Ok(Self::from_sorted(rows, cols, triplets))
    }

    fn from_sorted(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        let mut row_ptr = vec![0; rows + 1];
        for &(i, _, _) in &entries {
            row_ptr[i + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            rows,
            cols,
            entries,
            row_ptr,
        }
    }

    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut entries = Vec::new();
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v.abs() >= ZERO_CUTOFF {
                    entries.push((i, j, v));
                }
            }
        }
        Self::from_sorted(dense.rows(), dense.cols(), entries)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] = v;
        }
        d
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Stored entries of row `i` as `(row, col, value)`.
    pub fn row_entries(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.entries[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}
