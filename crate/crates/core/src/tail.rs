//! Innovation marginals in the domain of attraction of the normal law.
//!
//! Each model is symmetric about zero and described by its truncated second
//! moment `h_raw(x) = E[ξ² 1{|ξ| ≤ x}]`. [`TailModel::eval_h`] applies the
//! flooring `H(x) = h_raw(x ∨ (b + 1))` so that `H ≥ 1` everywhere; every
//! downstream formula goes through it.
//!
//! Shipped models:
//!
//! | name        | law of `|ξ|`                          | `h_raw(x)`, `x ≥ 1` |
//! |-------------|---------------------------------------|---------------------|
//! | `constant`  | `|ξ| = 1` (finite variance boundary)  | `1`                 |
//! | `pareto2`   | density `2 x^{-3}` on `[1, ∞)`        | `2 ln x`            |
//! | `logpareto` | density `4 x^{-3} ln x` on `[1, ∞)`   | `2 ln² x`           |

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::root;

/// Lower end of the bracket used by [`TailModel::eval_eta`].
pub const ETA_LOWER: f64 = 1.0 + 1e-12;
const ETA_REL_TOL: f64 = 1e-10;
const ETA_MAX_DOUBLINGS: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailModel {
    Constant,
    Pareto2,
    LogPareto,
}

impl TailModel {
    pub const ALL: [TailModel; 3] = [TailModel::Constant, TailModel::Pareto2, TailModel::LogPareto];

    pub fn name(self) -> &'static str {
        match self {
            TailModel::Constant => "constant",
            TailModel::Pareto2 => "pareto2",
            TailModel::LogPareto => "logpareto",
        }
    }

    /// `E[ξ² 1{|ξ| ≤ x}]` without the flooring.
    pub fn h_raw(self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        match self {
            TailModel::Constant => 1.0,
            TailModel::Pareto2 => 2.0 * x.ln(),
            TailModel::LogPareto => {
                let l = x.ln();
                2.0 * l * l
            }
        }
    }

    /// The shift `b = inf{x ≥ 0 : h_raw(x) > 1}`; zero for the constant model,
    /// where `h_raw` never exceeds one.
    pub fn b_shift(self) -> f64 {
        match self {
            TailModel::Constant => 0.0,
            TailModel::Pareto2 => 0.5f64.exp(),
            TailModel::LogPareto => std::f64::consts::FRAC_1_SQRT_2.exp(),
        }
    }

    /// Floored truncated second moment `H(x) = h_raw(x ∨ (b + 1))`.
    #[inline]
    pub fn eval_h(self, x: f64) -> f64 {
        match self {
            TailModel::Constant => 1.0,
            _ => self.h_raw(x.max(self.b_shift() + 1.0)),
        }
    }

    /// `y² H(1/|y|)`, with the value 0 at `y = 0`.
    #[inline]
    pub fn condition_term(self, y: f64) -> f64 {
        if y == 0.0 {
            0.0
        } else {
            y * y * self.eval_h(1.0 / y.abs())
        }
    }

    /// `P(|ξ| > x)`.
    pub fn survival(self, x: f64) -> f64 {
        if x < 1.0 {
            return 1.0;
        }
        match self {
            TailModel::Constant => 0.0,
            TailModel::Pareto2 => 1.0 / (x * x),
            TailModel::LogPareto => (2.0 * x.ln() + 1.0) / (x * x),
        }
    }

    /// `E|ξ|`.
    pub fn mean_abs(self) -> f64 {
        match self {
            TailModel::Constant => 1.0,
            TailModel::Pareto2 => 2.0,
            TailModel::LogPareto => 4.0,
        }
    }

    /// `E[|ξ| 1{|ξ| > x}]`.
    pub fn tail_first_moment(self, x: f64) -> f64 {
        if x < 1.0 {
            return self.mean_abs();
        }
        match self {
            TailModel::Constant => 0.0,
            TailModel::Pareto2 => 2.0 / x,
            TailModel::LogPareto => 4.0 * (x.ln() + 1.0) / x,
        }
    }

    /// `E[|ξ|³ 1{|ξ| ≤ x}]`.
    pub fn truncated_third_moment(self, x: f64) -> f64 {
        if x < 1.0 {
            return 0.0;
        }
        match self {
            TailModel::Constant => 1.0,
            TailModel::Pareto2 => 2.0 * (x - 1.0),
            TailModel::LogPareto => 4.0 * (x * x.ln() - x + 1.0),
        }
    }

    /// Inverse of the survival function: the magnitude `m ≥ 1` with
    /// `P(|ξ| > m) = u`, for `u ∈ (0, 1]`.
    pub fn magnitude(self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u <= 1.0, "magnitude uniform out of range: {u}");
        match self {
            TailModel::Constant => 1.0,
            TailModel::Pareto2 => 1.0 / u.sqrt(),
            TailModel::LogPareto => logpareto_magnitude(u),
        }
    }

    /// Symmetric draw from a magnitude uniform and a sign.
    #[inline]
    pub fn signed(self, u: f64, positive: bool) -> f64 {
        let m = self.magnitude(u);
        if positive {
            m
        } else {
            -m
        }
    }

    /// One draw: the top 53 bits of a word give the magnitude uniform in
    /// `(0, 1]`, the lowest bit gives the sign.
    #[inline]
    pub fn sample<R: RngCore + ?Sized>(self, rng: &mut R) -> f64 {
        let bits = rng.next_u64();
        self.signed(unit_open_closed(bits), bits & 1 == 1)
    }

    /// `η_j = inf{s > 1 : H(s)/s² ≤ 1/j}` by doubling from just above 1 and
    /// bisecting to relative tolerance 1e-10.
    pub fn eval_eta(self, j: u64) -> Result<f64> {
        if j == 0 {
            return Err(Error::Domain("eta index j must be >= 1".into()));
        }
        let target = 1.0 / j as f64;
        let done = |s: f64| self.eval_h(s) / (s * s) <= target;
        let (lo, hi) = root::double_until(ETA_LOWER, ETA_MAX_DOUBLINGS, done).map_err(|_| {
            Error::NoBracket(format!(
                "H(s)/s^2 > 1/{j} for all s up to 2^{ETA_MAX_DOUBLINGS}; H is not slowly varying"
            ))
        })?;
        if lo == hi {
            return Ok(hi);
        }
        Ok(root::bisect(lo, hi, ETA_REL_TOL, done))
    }

    /// A constant `C` with `H(x) ≤ C·max(1, x)^δ` for all `x ≥ 0`.
    pub fn power_bound(self, delta: f64) -> f64 {
        assert!(delta > 0.0);
        let floor = self.eval_h(0.0);
        match self {
            TailModel::Constant => 1.0,
            // sup of 2 ln x / x^δ is 2/(eδ), reached at x = e^{1/δ}
            TailModel::Pareto2 => floor.max(2.0 / (std::f64::consts::E * delta)),
            // sup of 2 ln² x / x^δ is 8/(e² δ²), reached at x = e^{2/δ}
            TailModel::LogPareto => {
                floor.max(8.0 / (std::f64::consts::E.powi(2) * delta * delta))
            }
        }
    }

    /// Whether the model has unbounded support, i.e. the ratios of
    /// [`check_da_equivalences`] are meaningful.
    pub fn has_tail(self) -> bool {
        !matches!(self, TailModel::Constant)
    }
}

impl fmt::Display for TailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TailModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TailModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown tail model '{s}'")))
    }
}

/// Maps a random word to `(0, 1]` using its top 53 bits.
#[inline]
pub(crate) fn unit_open_closed(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

// Solves (2t + 1) e^{-2t} = u for t = ln m ≥ 0 by Newton steps on the
// concave-in-log form g(t) = 2t - ln(2t + 1) + ln u, kept inside a bracket.
fn logpareto_magnitude(u: f64) -> f64 {
    if u >= 1.0 {
        return 1.0;
    }
    let target = -u.ln();
    let g = |t: f64| 2.0 * t - (2.0 * t + 1.0).ln() - target;
    let mut lo = 0.0;
    let mut hi = target.max(1.0);
    while g(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..100 {
        let gt = g(t);
        if gt == 0.0 {
            break;
        }
        if gt < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let slope = 4.0 * t / (2.0 * t + 1.0);
        let newton = if slope > 0.0 { t - gt / slope } else { f64::NAN };
        t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi || (gt.abs() < 1e-15 * target.max(1.0)) {
            break;
        }
    }
    t.exp()
}

/// `(1/N) Σ ξ_i² 1{|ξ_i| ≤ x}`.
pub fn empirical_h(samples: &[f64], x: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("empirical_h needs at least one sample"));
    }
    let total = crate::sum::sum(
        samples.iter().filter(|v| v.abs() <= x).map(|v| v * v),
    );
    Ok(total / samples.len() as f64)
}

/// Ratios whose decay to zero characterises slow variation of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DaRatios {
    pub x: f64,
    /// `x² P(|ξ| > x) / H(x)`
    pub r2: f64,
    /// `x E[|ξ| 1{|ξ| > x}] / H(x)`
    pub r3: f64,
    /// `E[|ξ|³ 1{|ξ| ≤ x}] / (x H(x))`
    pub r4: f64,
}

/// Evaluates the three ratios on a grid. Returns `None` for models without a
/// tail (no mass beyond a bounded support), where the ratios are not applicable.
pub fn check_da_equivalences(model: TailModel, grid: &[f64]) -> Option<Vec<DaRatios>> {
    if !model.has_tail() {
        return None;
    }
    Some(
        grid.iter()
            .map(|&x| {
                let h = model.eval_h(x);
                DaRatios {
                    x,
                    r2: x * x * model.survival(x) / h,
                    r3: x * model.tail_first_moment(x) / h,
                    r4: model.truncated_third_moment(x) / (x * h),
                }
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    // independent quadrature of the pareto2 density: 2 ∫_1^x t² t^{-3} dt
    fn pareto2_h_by_quadrature(x: f64) -> f64 {
        2.0 * crate::quad::integrate(|t| t * t * t.powi(-3), 1.0, x, 1e-13, 0.0, 1000)
            .unwrap()
            .value
    }

    #[test]
    fn constant_model_is_one() {
        assert_eq!(TailModel::Constant.eval_h(10.0), 1.0);
        assert_eq!(TailModel::Constant.eval_h(0.0), 1.0);
    }

    #[test]
    fn pareto2_h_matches_closed_form_and_quadrature() {
        let m = TailModel::Pareto2;
        assert_relative_eq!(m.eval_h(100.0), 9.210340371976184, max_relative = 1e-14);
        assert_relative_eq!(pareto2_h_by_quadrature(100.0), m.h_raw(100.0), max_relative = 1e-12);
        assert_relative_eq!(m.eval_h(0.0), 1.948153968360213, max_relative = 1e-14);
    }

    #[test]
    fn logpareto_pieces() {
        let m = TailModel::LogPareto;
        // frozen from mpmath quadrature of the density
        assert_relative_eq!(m.h_raw(100.0), 42.41518488382718, max_relative = 1e-13);
        assert_relative_eq!(m.survival(10.0), 0.05605170185988091, max_relative = 1e-13);
        assert_relative_eq!(m.eval_h(0.0), 2.455063450663283, max_relative = 1e-13);
        for u in [1.0, 0.9, 0.5, 1e-3, 1e-9, 1e-300] {
            let x = m.magnitude(u);
            assert_relative_eq!(m.survival(x), u, max_relative = 1e-12);
        }
    }

    #[test]
    fn pareto2_inverse_transform() {
        assert_eq!(TailModel::Pareto2.signed(0.25, true), 2.0);
        assert_eq!(TailModel::Pareto2.signed(0.25, false), -2.0);
        let m = TailModel::Pareto2.magnitude(1.0 - 1e-6);
        assert_abs_diff_eq!(m, 1.0000005, epsilon = 1e-9);
    }

    #[test]
    fn sampling_is_deterministic() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..3).map(|_| TailModel::Pareto2.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn pareto2_empirical_cdf_of_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut mags: Vec<f64> = (0..n).map(|_| TailModel::Pareto2.sample(&mut rng).abs()).collect();
        mags.sort_by(f64::total_cmp);
        let ks = mags
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - TailModel::Pareto2.survival(x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 99.9% one-sample KS critical value 1.95/sqrt(n)
        assert!(ks < 1.95 / (n as f64).sqrt(), "ks = {ks}");
    }

    #[test]
    fn eta_values() {
        assert_relative_eq!(TailModel::Constant.eval_eta(100).unwrap(), 10.0, max_relative = 1e-9);
        // independent mpmath bisection at 1e-12
        let eta = TailModel::Pareto2.eval_eta(100).unwrap();
        assert_relative_eq!(eta, 25.44164916901812, max_relative = 1e-9);
        assert_eq!(TailModel::Constant.eval_eta(1).unwrap(), ETA_LOWER);
        assert!(TailModel::Pareto2.eval_eta(0).is_err());
    }

    #[test]
    fn eta_consistency() {
        for m in TailModel::ALL {
            for j in [1u64, 2, 10, 100, 10_000, 1_000_000_000] {
                let eta = m.eval_eta(j).unwrap();
                let ratio = m.eval_h(eta) / (eta * eta);
                let target = 1.0 / j as f64;
                assert!(ratio <= target, "{m} j={j}");
                if eta > ETA_LOWER {
                    assert_relative_eq!(ratio, target, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn empirical_h_arithmetic() {
        assert_relative_eq!(empirical_h(&[1.0, -2.0, 3.0], 2.0).unwrap(), 5.0 / 3.0);
        assert_eq!(empirical_h(&[5.0], 1.0).unwrap(), 0.0);
        assert!(matches!(empirical_h(&[], 1.0), Err(Error::Empty(_))));
    }

    #[test]
    fn empirical_h_matches_h_raw() {
        for m in [TailModel::Pareto2, TailModel::LogPareto] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let xs: Vec<f64> = (0..1_000_000).map(|_| m.sample(&mut rng)).collect();
            for x in [10.0, 100.0, 1000.0] {
                let emp = empirical_h(&xs, x).unwrap();
                assert_relative_eq!(emp, m.h_raw(x), max_relative = 0.05);
            }
        }
    }

    #[test]
    fn da_ratios_pareto2() {
        let rows = check_da_equivalences(TailModel::Pareto2, &[100.0, 1e4, 1e6]).unwrap();
        assert_relative_eq!(rows[0].r2, 0.10857362047581296, max_relative = 1e-12);
        assert_relative_eq!(rows[2].r2, 0.03619120682527099, max_relative = 1e-12);
        for w in rows.windows(2) {
            assert!(w[1].r2 < w[0].r2 && w[1].r3 < w[0].r3 && w[1].r4 < w[0].r4);
        }
        assert!(check_da_equivalences(TailModel::Constant, &[100.0]).is_none());
    }

    #[test]
    fn slow_variation_at_large_x() {
        let m = TailModel::Pareto2;
        // ln 2 / ln x <= 0.05 needs x >= 2^20 (equality there); at exactly 1e6 the ratio is 1.0502
        assert_relative_eq!(m.eval_h(2e6) / m.eval_h(1e6), 1.0 + 2f64.ln() / 1e6f64.ln());
        let mut x = 1.05e6;
        while x < 1e300 {
            assert!((m.eval_h(2.0 * x) / m.eval_h(x) - 1.0).abs() <= 0.05);
            x *= 7.3;
        }
    }

    #[test]
    fn power_bound_holds_on_grid() {
        for m in TailModel::ALL {
            for delta in [0.01, 0.1, 0.5] {
                let c = m.power_bound(delta);
                let mut x = 1e-3;
                while x < 1e300 {
                    assert!(m.eval_h(x) <= c * x.max(1.0).powf(delta) * (1.0 + 1e-12));
                    x *= 1.1;
                }
            }
        }
    }

    proptest! {
        #[test]
        fn h_is_monotone_and_floored(a in 0.0f64..1e12, b in 0.0f64..1e12, which in 0usize..3) {
            let m = TailModel::ALL[which];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(m.eval_h(lo) <= m.eval_h(hi));
            prop_assert!(m.eval_h(lo) >= 1.0);
        }

        #[test]
        fn raw_h_starts_at_zero(which in 0usize..3, x in 0.0f64..1.0) {
            prop_assert_eq!(TailModel::ALL[which].h_raw(x), 0.0);
        }
    }
}
