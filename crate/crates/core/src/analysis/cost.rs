use alloc::format;

use crate::codec::SystemConfig;
use crate::{Error, Result};

/// Leading-order operation and communication counts with all big-O
/// constants set to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    /// `min(u_avg·t·nnz(A), v_avg·s·nnz(B)) / (mn)`
    pub per_worker_compute: f64,
    /// `u_avg·nnz(A)/m + v_avg·nnz(B)/n`
    pub per_worker_comm: f64,
    /// `N·((2u_avg−1)·nnz(A)/m + (2v_avg−1)·nnz(B)/n)` plus the same with
    /// the master averages times `R`
    pub encoding: f64,
    /// `K²(N−S+R) + K·(w_avg(K−R) + w*_avg·R)·nnz(A)·nnz(B)/(r·m·n)`
    pub decoding: f64,
}

pub fn cost_model(cfg: &SystemConfig, nnz_a: u64, nnz_b: u64) -> Result<CostReport> {
    cfg.validate()?;
    if nnz_a > (cfg.r * cfg.s) as u64 {
        return Err(Error::param(
            "nnz_a",
            format!("{nnz_a} exceeds r·s = {}", cfg.r * cfg.s),
        ));
    }
    if nnz_b > (cfg.r * cfg.t) as u64 {
        return Err(Error::param(
            "nnz_b",
            format!("{nnz_b} exceeds r·t = {}", cfg.r * cfg.t),
        ));
    }
    let (na, nb) = (nnz_a as f64, nnz_b as f64);
    let (m, n) = (cfg.m as f64, cfg.n as f64);
    let (r, s, t) = (cfg.r as f64, cfg.s as f64, cfg.t as f64);
    let k = m * n;
    let (u, v) = (cfg.worker_u.mean(), cfg.worker_v.mean());
    let (us, vs) = (cfg.master_u.mean(), cfg.master_v.mean());
    let big_n = cfg.workers as f64;
    let extra = cfg.extra as f64;
    let survivors = cfg.survivors() as f64;

    let per_worker_compute = f64::min(u * t * na, v * s * nb) / k;
    let per_worker_comm = u * na / m + v * nb / n;
    let encoding = big_n * ((2.0 * u - 1.0) * na / m + (2.0 * v - 1.0) * nb / n)
        + extra * ((2.0 * us - 1.0) * na / m + (2.0 * vs - 1.0) * nb / n);
    let decoding = k * k * (survivors + extra)
        + k * (cfg.w_avg() * (k - extra) + cfg.w_star_avg() * extra) * na * nb / (r * m * n);
    Ok(CostReport {
        per_worker_compute,
        per_worker_comm,
        encoding,
        decoding,
    })
}
