//! Weight distributions over the number of nonzero coefficients in a coding
//! vector, and the continuous distribution the coefficients themselves are
//! drawn from.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::distr::{Open01, StandardUniform};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Probabilities whose sum is within this distance of 1 are renormalized.
const NORMALIZE_SLACK: f64 = 1e-9;

/// A discrete distribution `Σ W_k x^k` over weights `1..=max_weight`.
///
/// Only weights with positive probability are stored, in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightDistribution {
    probs: Vec<(usize, f64)>,
    max_weight: usize,
}

impl WeightDistribution {
    /// Builds a distribution from `(weight, probability)` pairs.
    ///
    /// Pairs may come in any order. Zero-probability entries are dropped.
    /// A total within `1e-9` of one is renormalized; anything further off
    /// is rejected.
    pub fn new(pairs: &[(usize, f64)], max_weight: usize) -> Result<Self> {
        if max_weight == 0 {
            return Err(Error::param("max_weight", "must be at least 1"));
        }
        let mut probs: Vec<(usize, f64)> = Vec::with_capacity(pairs.len());
        for &(k, p) in pairs {
            if !(1..=max_weight).contains(&k) {
                return Err(Error::param(
                    "weight",
                    format!("weight {k} outside 1..={max_weight}"),
                ));
            }
            if !p.is_finite() || p < 0.0 || p > 1.0 {
                return Err(Error::param(
                    "probability",
                    format!("probability {p} of weight {k} not in [0, 1]"),
                ));
            }
            if probs.iter().any(|&(j, _)| j == k) {
                return Err(Error::param("weight", format!("weight {k} listed twice")));
            }
            if p > 0.0 {
                probs.push((k, p));
            }
        }
        probs.sort_by_key(|&(k, _)| k);
        let total: f64 = probs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > NORMALIZE_SLACK {
            return Err(Error::param(
                "probability",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        if total != 1.0 {
            for (_, p) in probs.iter_mut() {
                *p /= total;
            }
        }
        Ok(Self { probs, max_weight })
    }

    /// Point mass at `weight`.
    pub fn point(weight: usize, max_weight: usize) -> Result<Self> {
        Self::new(&[(weight, 1.0)], max_weight)
    }

    /// `x^max_weight`: every coefficient is nonzero.
    pub fn dense(max_weight: usize) -> Result<Self> {
        Self::point(max_weight, max_weight)
    }

    /// The simplest distribution with mean `target`: a point mass when
    /// `target` is an integer, otherwise the two-point mixture on
    /// `floor(target)` and `ceil(target)` with
    /// `λ = (ceil − target) / (ceil − floor)` on the lower weight.
    pub fn simplest(target: f64, max_weight: usize) -> Result<Self> {
        if !target.is_finite() || target < 1.0 {
            return Err(Error::param(
                "w_target",
                format!("{target} is below the lower bound 1"),
            ));
        }
        if target > max_weight as f64 {
            return Err(Error::param(
                "w_target",
                format!("{target} exceeds the upper bound max_weight = {max_weight}"),
            ));
        }
        let lo = libm::floor(target);
        let hi = libm::ceil(target);
        if lo == hi {
            return Self::point(lo as usize, max_weight);
        }
        let lambda = (hi - target) / (hi - lo);
        Self::new(
            &[(lo as usize, lambda), (hi as usize, 1.0 - lambda)],
            max_weight,
        )
    }

    pub fn max_weight(&self) -> usize {
        self.max_weight
    }

    /// `(weight, probability)` pairs with positive probability, ascending.
    pub fn probs(&self) -> &[(usize, f64)] {
        &self.probs
    }

    pub fn prob(&self, weight: usize) -> f64 {
        self.probs
            .iter()
            .find(|&&(k, _)| k == weight)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.len() == 1
    }

    /// Average weight `Σ W_k·k`, summed in ascending `k`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|&(k, p)| p * k as f64).sum()
    }

    /// Inverse-CDF draw from a single uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.sample(StandardUniform);
        let mut cumulative = 0.0;
        for &(k, p) in &self.probs {
            cumulative += p;
            if u < cumulative {
                return k;
            }
        }
        // u lands past the last bucket only through rounding of the cumulative sum
        self.probs[self.probs.len() - 1].0
    }
}

impl fmt::Display for WeightDistribution {
    /// Formats as `k:p` pairs separated by `;`, e.g. `3:0.5;4:0.5`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, p)) in self.probs.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{k}:{p}")?;
        }
        Ok(())
    }
}

/// Free-standing mean of a distribution.
pub fn mean_weight(dist: &WeightDistribution) -> f64 {
    dist.mean()
}

pub fn simplest_distribution(w_target: f64, max_weight: usize) -> Result<WeightDistribution> {
    WeightDistribution::simplest(w_target, max_weight)
}

pub fn sample_weight<R: Rng + ?Sized>(dist: &WeightDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// A weight distribution as written in configuration, before the maximum
/// weight (`m` or `n`) is known.
///
/// Textual forms: `simplest(<mean>)`, `dense`, `point(<k>)`, or explicit
/// pairs `k:p` separated by `,` or `;` (for example `2:0.5,4:0.5`).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightSpec {
    Simplest(f64),
    Dense,
    Point(usize),
    Pairs(Vec<(usize, f64)>),
}

impl WeightSpec {
    pub fn resolve(&self, max_weight: usize) -> Result<WeightDistribution> {
        match self {
            WeightSpec::Simplest(w) => WeightDistribution::simplest(*w, max_weight),
            WeightSpec::Dense => WeightDistribution::dense(max_weight),
            WeightSpec::Point(k) => WeightDistribution::point(*k, max_weight),
            WeightSpec::Pairs(pairs) => WeightDistribution::new(pairs, max_weight),
        }
    }
}

impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_f64 = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{t}` is not a number")))
        };
        let parse_usize = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("`{t}` is not a positive integer")))
        };
        if s.eq_ignore_ascii_case("dense") {
            return Ok(WeightSpec::Dense);
        }
        if let Some(inner) = call_argument(s, "simplest") {
            return Ok(WeightSpec::Simplest(parse_f64(inner)?));
        }
        if let Some(inner) = call_argument(s, "point") {
            return Ok(WeightSpec::Point(parse_usize(inner)?));
        }
        let mut pairs = Vec::new();
        for item in s.split([',', ';']).filter(|t| !t.trim().is_empty()) {
            let (k, p) = item
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("expected `weight:prob`, got `{item}`")))?;
            pairs.push((parse_usize(k)?, parse_f64(p)?));
        }
        if pairs.is_empty() {
            return Err(Error::Parse(format!("empty weight distribution `{s}`")));
        }
        Ok(WeightSpec::Pairs(pairs))
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightSpec::Simplest(w) => write!(f, "simplest({w})"),
            WeightSpec::Dense => f.write_str("dense"),
            WeightSpec::Point(k) => write!(f, "point({k})"),
            WeightSpec::Pairs(pairs) => {
                for (i, (k, p)) in pairs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{k}:{p}")?;
                }
                Ok(())
            }
        }
    }
}

fn call_argument<'a>(s: &'a str, name: &str) -> Option<&'a str> {
    let rest = s.strip_prefix(name)?.trim_start();
    rest.strip_prefix('(')?.strip_suffix(')')
}

/// Distribution of the nonzero coding coefficients. Both choices have an
/// absolutely continuous CDF, so a draw is exactly zero with probability 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientDistribution {
    #[default]
    Uniform01,
    StandardNormal,
}

impl CoefficientDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            CoefficientDistribution::Uniform01 => rng.sample(Open01),
            CoefficientDistribution::StandardNormal => loop {
                let v: f64 = rng.sample(StandardNormal);
                if v != 0.0 {
                    break v;
                }
            },
        }
    }
}

pub fn sample_coefficient<R: Rng + ?Sized>(cdist: CoefficientDistribution, rng: &mut R) -> f64 {
    cdist.sample(rng)
}

impl fmt::Display for CoefficientDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoefficientDistribution::Uniform01 => "uniform01",
            CoefficientDistribution::StandardNormal => "standard_normal",
        })
    }
}

impl FromStr for CoefficientDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform01" | "uniform" => Ok(CoefficientDistribution::Uniform01),
            "standard_normal" | "normal" | "gaussian" => Ok(CoefficientDistribution::StandardNormal),
            other => Err(Error::Parse(format!(
                "unknown coefficient distribution `{other}` (expected uniform01 or standard_normal)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_of_point_and_mixture() {
        let d = WeightDistribution::point(8, 8).unwrap();
        assert_eq!(mean_weight(&d), 8.0);
        let d = WeightDistribution::new(&[(2, 0.5), (4, 0.5)], 4).unwrap();
        assert_eq!(mean_weight(&d), 3.0);
        let d = WeightDistribution::new(&[(3, 0.8377), (4, 0.1623)], 8).unwrap();
        assert!((mean_weight(&d) - 3.1623).abs() < 1e-4);
    }

    #[test]
    fn simplest_cases() {
        // w_avg = 9 is a perfect square: per-side target 3
        let d = simplest_distribution(3.0, 8).unwrap();
        assert_eq!(d.probs(), &[(3, 1.0)]);
        let d = simplest_distribution(1.0, 8).unwrap();
        assert_eq!(d.probs(), &[(1, 1.0)]);

        let w = libm::sqrt(10.0);
        let d = simplest_distribution(w, 8).unwrap();
        let lambda = 4.0 - w; // (4 − √10)/(4 − 3)
        assert_eq!(d.probs().len(), 2);
        assert_eq!(d.probs()[0].0, 3);
        assert_eq!(d.probs()[1].0, 4);
        assert!((d.prob(3) - 0.8377).abs() < 1e-4);
        assert!((d.prob(4) - 0.1623).abs() < 1e-4);
        assert!((d.prob(3) - lambda).abs() < 1e-15);
        assert!((d.mean() - w).abs() < 1e-12);
    }

    #[test]
    fn simplest_rejects_out_of_range() {
        match simplest_distribution(0.5, 8) {
            Err(Error::Parameter { name, reason }) => {
                assert_eq!(name, "w_target");
                assert!(reason.contains("lower bound"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match simplest_distribution(8.5, 8) {
            Err(Error::Parameter { reason, .. }) => assert!(reason.contains("upper bound")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn construction_validation() {
        assert!(WeightDistribution::new(&[(0, 1.0)], 4).is_err());
        assert!(WeightDistribution::new(&[(5, 1.0)], 4).is_err());
        assert!(WeightDistribution::new(&[(2, 0.5), (3, 0.4)], 4).is_err());
        assert!(WeightDistribution::new(&[(2, 0.5), (2, 0.5)], 4).is_err());
        assert!(WeightDistribution::new(&[(2, -0.1), (3, 1.1)], 4).is_err());
        // within slack: renormalized
        let d = WeightDistribution::new(&[(2, 0.5), (3, 0.5 + 5e-10)], 4).unwrap();
        let total: f64 = d.probs().iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        // zero-probability weights are dropped
        let d = WeightDistribution::new(&[(1, 0.0), (3, 1.0)], 4).unwrap();
        assert_eq!(d.probs(), &[(3, 1.0)]);
    }

    #[test]
    fn point_mass_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d8 = WeightDistribution::point(8, 8).unwrap();
        let d1 = WeightDistribution::point(1, 8).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_weight(&d8, &mut rng), 8);
            assert_eq!(sample_weight(&d1, &mut rng), 1);
        }
    }

    #[test]
    fn mixture_sampling_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = WeightDistribution::new(&[(2, 0.5), (4, 0.5)], 4).unwrap();
        let draws = 100_000;
        let twos = (0..draws).filter(|_| d.sample(&mut rng) == 2).count();
        let freq = twos as f64 / draws as f64;
        assert!((0.49..=0.51).contains(&freq), "freq {freq}");
    }

    #[test]
    fn coefficient_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v = sample_coefficient(CoefficientDistribution::Uniform01, &mut rng);
            assert!(v > 0.0 && v < 1.0);
        }
        let draws = 100_000;
        let sum: f64 = (0..draws)
            .map(|_| sample_coefficient(CoefficientDistribution::StandardNormal, &mut rng))
            .sum();
        let mean = sum / draws as f64;
        assert!(mean.abs() <= 0.02, "mean {mean}");

        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        assert_eq!(
            sample_coefficient(CoefficientDistribution::Uniform01, &mut a),
            sample_coefficient(CoefficientDistribution::Uniform01, &mut b)
        );
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("simplest(3)".parse::<WeightSpec>().unwrap(), WeightSpec::Simplest(3.0));
        assert_eq!("dense".parse::<WeightSpec>().unwrap(), WeightSpec::Dense);
        assert_eq!(
            "2:0.5, 4:0.5".parse::<WeightSpec>().unwrap(),
            WeightSpec::Pairs(vec![(2, 0.5), (4, 0.5)])
        );
        assert!("simplest(x)".parse::<WeightSpec>().is_err());
        assert!("".parse::<WeightSpec>().is_err());
        let d = "simplest(3)".parse::<WeightSpec>().unwrap().resolve(8).unwrap();
        assert_eq!(d.probs(), &[(3, 1.0)]);
        let spec: WeightSpec = "3:0.25;4:0.75".parse().unwrap();
        assert_eq!(spec.to_string().parse::<WeightSpec>().unwrap(), spec);
    }

    proptest! {
        #[test]
        fn simplest_is_valid_and_idempotent(w in 1.0f64..16.0) {
            let d = WeightDistribution::simplest(w, 16).unwrap();
            let total: f64 = d.probs().iter().map(|p| p.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(d.probs().iter().all(|p| p.1 >= 0.0));
            prop_assert!((d.mean() - w).abs() < 1e-12);
            prop_assert_eq!(d.is_point_mass(), w.fract() == 0.0);

            let again = WeightDistribution::simplest(d.mean(), 16).unwrap();
            prop_assert_eq!(again.probs().len(), d.probs().len());
            for (a, b) in again.probs().iter().zip(d.probs()) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.1 - b.1).abs() < 1e-12);
            }
        }

        #[test]
        fn integer_targets_are_point_masses(k in 1usize..=16) {
            let d = WeightDistribution::simplest(k as f64, 16).unwrap();
            prop_assert_eq!(d.probs(), &[(k, 1.0)][..]);
        }

        #[test]
        fn empirical_frequencies_converge(p2 in 0.05f64..0.95, seed in any::<u64>()) {
            let d = WeightDistribution::new(&[(2, p2), (5, 1.0 - p2)], 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 20_000;
            let hits = (0..n).filter(|_| d.sample(&mut rng) == 2).count();
            let freq = hits as f64 / n as f64;
            let w = d.prob(2);
            prop_assert!((freq - w).abs() <= 4.0 * (w * (1.0 - w) / n as f64).sqrt());
        }
    }
}
