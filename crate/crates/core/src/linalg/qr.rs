use alloc::vec::Vec;

use super::DenseMatrix;
use crate::{Error, Result};

/// Householder QR with column pivoting, `G·P = Q·R`, for matrices with at
/// least as many rows as columns.
///
/// The factorization is computed once and can then solve any number of
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`: `R` on and above the diagonal, Householder
    /// vectors (without their unit leading entry) below.
    packed: Vec<f64>,
    /// `beta` of each reflector `I − beta·v·vᵀ`.
    betas: Vec<f64>,
    /// `perm[k]` is the original column now at position `k`.
    perm: Vec<usize>,
    /// Row exchanged with row `k` before reflector `k` is applied.
    row_swaps: Vec<usize>,
    factor_flops: u64,
}

impl PivotedQr {
    pub fn new(g: &DenseMatrix) -> Result<Self> {
        let (rows, cols) = g.shape();
        if rows < cols {
            return Err(Error::Shape {
                op: "PivotedQr::new (needs rows >= cols)",
                left: (rows, cols),
                right: (cols, cols),
            });
        }
        let mut a = g.as_slice().to_vec();
        let at = |i: usize, j: usize| i * cols + j;
        let mut perm: Vec<usize> = (0..cols).collect();
        let mut betas = Vec::with_capacity(cols);
        let mut row_swaps = Vec::with_capacity(cols);
        let mut norms: Vec<f64> = (0..cols)
            .map(|j| (0..rows).map(|i| a[at(i, j)] * a[at(i, j)]).sum())
            .collect();
        let mut flops = 0u64;

        for k in 0..cols {
            // bring the column of largest remaining norm to position k;
            // recompute the norms exactly to avoid downdating drift
            for j in k..cols {
                norms[j] = (k..rows).map(|i| a[at(i, j)] * a[at(i, j)]).sum();
            }
            flops += 2 * ((rows - k) * (cols - k)) as u64;
            let pivot = (k..cols)
                .max_by(|&x, &y| norms[x].total_cmp(&norms[y]))
                .unwrap_or(k);
            if pivot != k {
                for i in 0..rows {
                    a.swap(at(i, k), at(i, pivot));
                }
                perm.swap(k, pivot);
                norms.swap(k, pivot);
            }

            // move the largest entry onto the diagonal; a column that is
            // then already triangular needs no reflector, which keeps
            // permutation-like systems exact
            let lead = (k..rows)
                .max_by(|&x, &y| a[at(x, k)].abs().total_cmp(&a[at(y, k)].abs()))
                .unwrap_or(k);
            if lead != k {
                // columns left of k hold earlier reflectors and stay put
                for j in k..cols {
                    a.swap(at(k, j), at(lead, j));
                }
            }
            row_swaps.push(lead);

            let alpha = a[at(k, k)];
            let sigma: f64 = (k + 1..rows).map(|i| a[at(i, k)] * a[at(i, k)]).sum();
            if sigma == 0.0 {
                betas.push(0.0);
                continue;
            }
            let norm = libm::sqrt(alpha * alpha + sigma);
            let r_kk = if alpha > 0.0 { -norm } else { norm };
            let v0 = alpha - r_kk;
            // scale the reflector so its leading entry is 1
            for i in k + 1..rows {
                a[at(i, k)] /= v0;
            }
            let beta = -v0 / r_kk;
            a[at(k, k)] = r_kk;
            betas.push(beta);

            for j in k + 1..cols {
                let mut dot = a[at(k, j)];
                for i in k + 1..rows {
                    dot += a[at(i, k)] * a[at(i, j)];
                }
                let f = beta * dot;
                a[at(k, j)] -= f;
                for i in k + 1..rows {
                    a[at(i, j)] -= f * a[at(i, k)];
                }
            }
            flops += 4 * ((rows - k) * (cols - k)) as u64;
        }

        Ok(Self {
            rows,
            cols,
            packed: a,
            betas,
            perm,
            row_swaps,
            factor_flops: flops,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `|R_kk|` in pivot order (nonincreasing up to rounding).
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|k| self.packed[k * self.cols + k].abs())
            .collect()
    }

    /// Multiply-adds spent on the factorization.
    pub fn factor_flops(&self) -> u64 {
        self.factor_flops
    }

    /// Multiply-adds needed per right-hand side by [`Self::solve`].
    pub fn flops_per_rhs(&self) -> u64 {
        let (m, n) = (self.rows as u64, self.cols as u64);
        // Qᵀy: Σ_k 2(m − k); back substitution: n²
        2 * (n * m - n * (n - 1) / 2) + n * n
    }

    /// Least-squares solution of `G·Z = Y` for every column of `y`.
    pub fn solve(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.rows() != self.rows {
            return Err(Error::Shape {
                op: "PivotedQr::solve",
                left: (self.rows, self.cols),
                right: y.shape(),
            });
        }
        let (m, n, p) = (self.rows, self.cols, y.cols());
        let at = |i: usize, j: usize| i * n + j;
        if let Some(k) = (0..n).find(|&k| self.packed[at(k, k)] == 0.0) {
            return Err(Error::RankDeficient {
                rank: k,
                required: n,
            });
        }
        let mut work = y.as_slice().to_vec();
        let wat = |i: usize, j: usize| i * p + j;

        // Qᵀ·Y, one reflector at a time across all right-hand sides
        for k in 0..n {
            let lead = self.row_swaps[k];
            if lead != k {
                for c in 0..p {
                    work.swap(wat(k, c), wat(lead, c));
                }
            }
            let beta = self.betas[k];
            if beta == 0.0 {
                continue;
            }
            for c in 0..p {
                let mut dot = work[wat(k, c)];
                for i in k + 1..m {
                    dot += self.packed[at(i, k)] * work[wat(i, c)];
                }
                let f = beta * dot;
                work[wat(k, c)] -= f;
                for i in k + 1..m {
                    work[wat(i, c)] -= f * self.packed[at(i, k)];
                }
            }
        }

        // back substitution R·X = (QᵀY)[..n], then undo the column pivoting
        let mut x = DenseMatrix::zeros(n, p);
        for c in 0..p {
            for k in (0..n).rev() {
                let mut acc = work[wat(k, c)];
                for j in k + 1..n {
                    acc -= self.packed[at(k, j)] * x[(self.perm[j], c)];
                }
                x[(self.perm[k], c)] = acc / self.packed[at(k, k)];
            }
        }
        Ok(x)
    }
}
