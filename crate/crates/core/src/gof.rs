//! Distance of a replicate sample from the standard normal law.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sum;

/// `Φ(x) = erfc(−x/√2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("NaN in samples".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Kolmogorov–Smirnov distance `sup_x |F̂_R(x) − Φ(x)|`.
pub fn ks_normal(samples: &[f64]) -> Result<f64> {
    let v = sorted(samples)?;
    let r = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / r - f).max(f - i as f64 / r)
        })
        .fold(0.0, f64::max))
}

/// Cramér–von Mises statistic `1/(12R) + Σ (Φ(x_(i)) − (2i−1)/(2R))²`.
pub fn cvm_normal(samples: &[f64]) -> Result<f64> {
    let v = sorted(samples)?;
    let r = v.len() as f64;
    let terms = v
        .iter()
        .enumerate()
        .map(|(i, &x)| (normal_cdf(x) - (2 * i + 1) as f64 / (2.0 * r)).powi(2));
    Ok(1.0 / (12.0 * r) + sum::sum(terms))
}

/// Asymptotic 95% critical value of the KS distance, `1.36/√R`.
pub fn ks_critical_95(r: usize) -> f64 {
    1.36 / (r as f64).sqrt()
}

pub const SUMMARY_QUANTILES: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
    /// `(p, q_p)` pairs at [`SUMMARY_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
}

impl Summary {
    pub fn median(&self) -> f64 {
        quantile_from(&self.quantiles, 0.5)
    }

    pub fn iqr(&self) -> f64 {
        quantile_from(&self.quantiles, 0.75) - quantile_from(&self.quantiles, 0.25)
    }
}

fn quantile_from(qs: &[(f64, f64)], p: f64) -> f64 {
    qs.iter().find(|(q, _)| *q == p).map(|(_, v)| *v).unwrap_or(f64::NAN)
}

/// Linearly interpolated quantile of sorted data (Hyndman–Fan type 7).
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn summarize(samples: &[f64]) -> Result<Summary> {
    let v = sorted(samples)?;
    let r = v.len() as f64;
    let mean = sum::sum(v.iter().copied()) / r;
    let variance = if v.len() > 1 {
        sum::sum(v.iter().map(|x| (x - mean).powi(2))) / (r - 1.0)
    } else {
        0.0
    };
    Ok(Summary {
        count: v.len(),
        mean,
        variance,
        std_dev: variance.sqrt(),
        quantiles: SUMMARY_QUANTILES.iter().map(|&p| (p, quantile_sorted(&v, p))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn phi_reference_values() {
        // 50-digit mpmath values
        for (x, p) in [
            (-5.0, 2.866515718791939e-7),
            (-1.0, 0.15865525393145705),
            (0.0, 0.5),
            (0.5, 0.6914624612740131),
            (1.0, 0.8413447460685429),
            (2.0, 0.9772498680518208),
            (3.0, 0.9986501019683699),
        ] {
            assert!((normal_cdf(x) - p).abs() <= 1e-12, "{x}");
        }
        assert_relative_eq!(normal_cdf(-5.0), 2.866515718791939e-7, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_sample_is_far_from_normal() {
        let d = ks_normal(&[10.0; 100]).unwrap();
        assert!(d > 0.999);
        assert!(ks_normal(&[]).is_err());
        assert!(ks_normal(&[f64::NAN]).is_err());
    }

    #[test]
    fn summary_of_small_sample() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_relative_eq!(s.variance, 5.0 / 3.0);
        assert_eq!(s.median(), 2.5);
        assert_eq!(s.iqr(), 3.25 - 1.75);
    }

    fn brute_ks(x: &[f64]) -> f64 {
        let r = x.len() as f64;
        let mut d = 0.0f64;
        for &xi in x {
            let le = x.iter().filter(|&&y| y <= xi).count() as f64 / r;
            let lt = x.iter().filter(|&&y| y < xi).count() as f64 / r;
            let f = normal_cdf(xi);
            d = d.max((le - f).abs()).max((f - lt).abs());
        }
        d
    }

    fn brute_cvm(x: &[f64]) -> f64 {
        let r = x.len() as f64;
        let mut total = 1.0 / (12.0 * r);
        for (i, &xi) in x.iter().enumerate() {
            // rank with ties broken by position, matching a stable sort
            let rank = x.iter().enumerate().filter(|&(j, &y)| y < xi || (y == xi && j <= i)).count() as f64;
            total += (normal_cdf(xi) - (2.0 * rank - 1.0) / (2.0 * r)).powi(2);
        }
        total
    }

    proptest! {
        #[test]
        fn scorers_match_brute_force(x in prop::collection::vec(prop_oneof![-4.0f64..4.0, Just(0.5)], 1..=100)) {
            let ks = ks_normal(&x).unwrap();
            prop_assert!((ks - brute_ks(&x)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&ks));
            let cvm = cvm_normal(&x).unwrap();
            prop_assert!((cvm - brute_cvm(&x)).abs() <= 1e-12 * cvm.max(1.0));
        }
    }
}
