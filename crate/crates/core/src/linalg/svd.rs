//! Singular values by Householder bidiagonalization followed by implicit
//! shifted QR on the bidiagonal (Golub-Reinsch), without accumulating the
//! singular vectors.

use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::{Error, Result};

const MAX_ITERATIONS: usize = 75;

#[inline]
fn hypot(a: f64, b: f64) -> f64 {
    let (a, b) = (a.abs(), b.abs());
    if a > b {
        a * libm::sqrt(1.0 + (b / a) * (b / a))
    } else if b == 0.0 {
        0.0
    } else {
        b * libm::sqrt(1.0 + (a / b) * (a / b))
    }
}

#[inline]
fn with_sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Singular values of `matrix`, sorted in descending order. The result has
/// `min(rows, cols)` entries.
pub fn singular_values(matrix: &DenseMatrix) -> Result<Vec<f64>> {
    let a = matrix.swap_rows_cols_if_wide();
    let (m, n) = a.shape();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut a = a.into_vec();
    let at = |i: usize, j: usize| i * n + j;

    let mut w = vec![0.0; n];
    let mut rv1 = vec![0.0; n];
    let (mut g, mut scale, mut anorm) = (0.0f64, 0.0f64, 0.0f64);

    for i in 0..n {
        let l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        let mut s;
        // left Householder: zero column i below the diagonal
        for k in i..m {
            scale += a[at(k, i)].abs();
        }
        if scale != 0.0 {
            s = 0.0;
            for k in i..m {
                a[at(k, i)] /= scale;
                s += a[at(k, i)] * a[at(k, i)];
            }
            let f = a[at(i, i)];
            g = -with_sign(libm::sqrt(s), f);
            let h = f * g - s;
            a[at(i, i)] = f - g;
            for j in l..n {
                let mut s = 0.0;
                for k in i..m {
                    s += a[at(k, i)] * a[at(k, j)];
                }
                let f = s / h;
                for k in i..m {
                    a[at(k, j)] += f * a[at(k, i)];
                }
            }
            for k in i..m {
                a[at(k, i)] *= scale;
            }
        }
        w[i] = scale * g;

        // right Householder: zero row i right of the superdiagonal
        g = 0.0;
        scale = 0.0;
        if i < m && i + 1 != n {
            for k in l..n {
                scale += a[at(i, k)].abs();
            }
            if scale != 0.0 {
                s = 0.0;
                for k in l..n {
                    a[at(i, k)] /= scale;
                    s += a[at(i, k)] * a[at(i, k)];
                }
                let f = a[at(i, l)];
                g = -with_sign(libm::sqrt(s), f);
                let h = f * g - s;
                a[at(i, l)] = f - g;
                for k in l..n {
                    rv1[k] = a[at(i, k)] / h;
                }
                for j in l..m {
                    let mut s = 0.0;
                    for k in l..n {
                        s += a[at(j, k)] * a[at(i, k)];
                    }
                    for k in l..n {
                        a[at(j, k)] += s * rv1[k];
                    }
                }
                for k in l..n {
                    a[at(i, k)] *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    let negligible = |x: f64| x.abs() <= f64::EPSILON * anorm;

    for k in (0..n).rev() {
        let mut iterations = 0;
        loop {
            // find the start `l` of the unreduced block ending at k
            let mut l = k;
            let mut cancel = true;
            loop {
                if l == 0 || negligible(rv1[l]) {
                    cancel = false;
                    break;
                }
                if negligible(w[l - 1]) {
                    break;
                }
                l -= 1;
            }
            if cancel {
                // w[l-1] is negligible: chase rv1[l] out with Givens rotations
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if negligible(f) {
                        break;
                    }
                    let g = w[i];
                    let h = hypot(f, g);
                    w[i] = h;
                    c = g / h;
                    s = -f / h;
                }
            }
            let z = w[k];
            if l == k {
                if z < 0.0 {
                    w[k] = -z;
                }
                break;
            }
            if iterations == MAX_ITERATIONS {
                return Err(Error::NoConvergence);
            }
            iterations += 1;

            // Wilkinson-style shift from the trailing 2x2 block
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = hypot(f, 1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + with_sign(g, f))) - h)) / x;

            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut z = hypot(f, h);
                rv1[j] = z;
                c = f / z;
                s = h / z;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                z = hypot(f, h);
                w[j] = z;
                if z != 0.0 {
                    c = f / z;
                    s = h / z;
                }
                f = c * g + s * y;
                x = c * y - s * g;
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }

    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence);
    }
    w.sort_by(|a, b| b.total_cmp(a));
    Ok(w)
}
