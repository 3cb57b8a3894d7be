use alloc::format;

use crate::{Error, Result};

/// `1 − (1 − (1 − w/K)^survivors)^K`: probability that a `survivors × K`
/// matrix of i.i.d. Bernoulli(`w/K`) entries has an all-zero column.
///
/// Evaluated as `−expm1(K·log1p(−exp(survivors·log1p(−w/K))))` so tiny
/// probabilities keep their relative accuracy.
pub fn failure_prob_approx(k: usize, survivors: usize, w_avg: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    if survivors < k {
        return Err(Error::param(
            "survivors",
            format!("{survivors} survivors is fewer than K = {k}"),
        ));
    }
    zero_column_prob_approx(k, survivors, w_avg, 0, 0.0)
}

/// Bernoulli approximation for a generator with `survivors` worker rows of
/// mean weight `w_avg` and `extra` master rows of mean weight `w_star_avg`.
/// Reduces to [`failure_prob_approx`] when `extra == 0`.
pub fn zero_column_prob_approx(
    k: usize,
    survivors: usize,
    w_avg: f64,
    extra: usize,
    w_star_avg: f64,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::param("K", "must be at least 1"));
    }
    let kf = k as f64;
    if !(w_avg > 0.0 && w_avg <= kf) {
        return Err(Error::param(
            "w_avg",
            format!("{w_avg} outside (0, K = {k}]"),
        ));
    }
    if extra > 0 && !(w_star_avg > 0.0 && w_star_avg <= kf) {
        return Err(Error::param(
            "w_star_avg",
            format!("{w_star_avg} outside (0, K = {k}]"),
        ));
    }
    // log P(one column is all zero)
    let mut log_zero = survivors as f64 * libm::log1p(-w_avg / kf);
    if extra > 0 {
        log_zero += extra as f64 * libm::log1p(-w_star_avg / kf);
    }
    let col_zero = libm::exp(log_zero);
    Ok(-libm::expm1(kf * libm::log1p(-col_zero)))
}

/// `K!/K^K`, the probability that `K` weight-one rows hit all `K` columns.
pub fn single_weight_full_rank_prob(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    if k <= 170 {
        (1..=k).map(|i| i as f64 / kf).product()
    } else {
        libm::exp(libm::lgamma(kf + 1.0) - kf * libm::log(kf))
    }
}

/// One-sided upper confidence bound on a probability after `trials`
/// trials with no event observed: `1 − (1 − confidence)^(1/trials)`.
pub fn zero_failure_upper_bound(trials: u64, confidence: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    -libm::expm1(libm::log1p(-confidence) / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_weight_never_fails() {
        assert_eq!(failure_prob_approx(64, 64, 64.0).unwrap(), 0.0);
        assert_eq!(failure_prob_approx(4, 7, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn spot_value_near_0582() {
        // 50-digit evaluation of the closed form, frozen
        let oracle = 0.582_799_093_272_375_4;
        let p = failure_prob_approx(64, 64, libm::log(64.0)).unwrap();
        assert!((p - oracle).abs() <= 1e-12 * oracle, "{p}");
        assert!((p - 0.582).abs() < 1e-3);
    }

    #[test]
    fn more_survivors_help() {
        let w = 2.0 * libm::log(64.0);
        assert!(failure_prob_approx(64, 80, w).unwrap() < failure_prob_approx(64, 64, w).unwrap());
    }

    #[test]
    fn argument_errors() {
        assert!(failure_prob_approx(0, 1, 1.0).is_err());
        assert!(failure_prob_approx(4, 3, 1.0).is_err());
        assert!(failure_prob_approx(4, 4, 4.5).is_err());
        assert!(failure_prob_approx(4, 4, 0.0).is_err());
        assert!(zero_column_prob_approx(4, 4, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn extra_rows_reduce_approximation() {
        let base = zero_column_prob_approx(64, 64, 4.0, 0, 0.0).unwrap();
        assert_eq!(base, failure_prob_approx(64, 64, 4.0).unwrap());
        let with = zero_column_prob_approx(64, 64, 4.0, 1, 16.0).unwrap();
        assert!(with < base);
        assert_eq!(zero_column_prob_approx(64, 64, 4.0, 1, 64.0).unwrap(), 0.0);
    }

    #[test]
    fn factorial_ratio() {
        assert_eq!(single_weight_full_rank_prob(1), 1.0);
        assert_eq!(single_weight_full_rank_prob(4), 0.09375);
        let k = 64.0f64;
        let oracle = (libm::lgamma(k + 1.0) - k * k.ln()).exp();
        let got = single_weight_full_rank_prob(64);
        assert!((got - oracle).abs() <= 1e-12 * oracle);
        // continuity across the product / log-gamma switch
        let a = single_weight_full_rank_prob(170);
        let b = (libm::lgamma(171.0) - 170.0 * 170f64.ln()).exp();
        assert!((a - b).abs() <= 1e-11 * b);
        assert!(single_weight_full_rank_prob(200) > 0.0);
    }

    #[test]
    fn upper_bound_rule_of_three() {
        let ub = zero_failure_upper_bound(1000, 0.95);
        assert!((ub - 3.0 / 1000.0).abs() < 1e-4);
        assert_eq!(zero_failure_upper_bound(0, 0.95), 1.0);
    }

    #[test]
    fn monotone_over_grids() {
        for k in [16usize, 64] {
            let mut ws = alloc::vec::Vec::new();
            let mut w = 1.0;
            while w <= k as f64 {
                ws.push(w);
                w += 0.5;
            }
            for survivors in k..=k + 16 {
                for pair in ws.windows(2) {
                    let a = failure_prob_approx(k, survivors, pair[0]).unwrap();
                    let b = failure_prob_approx(k, survivors, pair[1]).unwrap();
                    assert!(b <= a, "w monotonicity at K={k} s={survivors}");
                }
                if survivors > k {
                    for &w in &ws {
                        let a = failure_prob_approx(k, survivors - 1, w).unwrap();
                        let b = failure_prob_approx(k, survivors, w).unwrap();
                        assert!(b <= a, "survivor monotonicity at K={k} w={w}");
                    }
                }
            }
        }
    }
}
