//! Normalizing sequences: the root-found `D_n`, its long-memory asymptotic
//! form, the constant `c_α`, and the mean-absolute-value normalizer `B_n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;
use crate::root;
use crate::sum::{self, Accumulator};
use crate::tail::TailModel;
use crate::weights::{SlowFactor, WeightArray};

const DN_REL_TOL: f64 = 1e-9;
const DN_MAX_DOUBLINGS: u32 = 200;
const SCAN_POINTS: usize = 1000;
// below this many nonzero weights the condition sum is evaluated serially
const PAR_THRESHOLD: usize = 1 << 16;
const PAR_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RootFind,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizerReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub method: Method,
    /// `g(D) − 1` where `g(s) = Σ (c²/s²) H(s/|c|)`; nonpositive.
    pub residual: f64,
    /// `D² ≥ Σ c²`.
    pub lower_bound_check: bool,
}

/// The condition sum `g(s) = s^{-2} Σ_k c_k² H(s/|c_k|)` over nonzero weights.
pub struct ConditionSum {
    abs: Vec<f64>,
    model: TailModel,
}

impl ConditionSum {
    pub fn new(weights: &WeightArray, model: TailModel) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("weights"));
        }
        let abs: Vec<f64> = weights.entries.iter().filter(|c| **c != 0.0).map(|c| c.abs()).collect();
        if abs.is_empty() {
            return Err(Error::AllZeroWeights);
        }
        Ok(ConditionSum { abs, model })
    }

    pub fn eval(&self, s: f64) -> f64 {
        let model = self.model;
        let term = |c: f64| c * c * model.eval_h(s / c);
        // fixed chunking keeps the result independent of the thread count
        let total = if self.abs.len() < PAR_THRESHOLD {
            sum::sum(self.abs.iter().map(|&c| term(c)))
        } else {
            let partials: Vec<f64> = self
                .abs
                .par_chunks(PAR_CHUNK)
                .map(|chunk| sum::sum(chunk.iter().map(|&c| term(c))))
                .collect();
            sum::sum(partials)
        };
        total / (s * s)
    }

    pub fn sum_squares(&self) -> f64 {
        sum::sum(self.abs.iter().map(|c| c * c))
    }
}

/// `D = inf{s ≥ 1 : g(s) ≤ 1}` by doubling then bisection from
/// `max(1, √Σc²)`, followed by a log-grid scan of `[1, D]` for an earlier crossing.
pub fn solve_dn(weights: &WeightArray, model: TailModel) -> Result<NormalizerReport> {
    let g = ConditionSum::new(weights, model)?;
    let sum_sq = g.sum_squares();
    let s0 = sum_sq.sqrt().max(1.0);
    let done = |s: f64| g.eval(s) <= 1.0;
    let (lo, hi) = root::double_until(s0, DN_MAX_DOUBLINGS, done)
        .map_err(|_| Error::NoConvergence(format!("condition sum above 1 up to 2^{DN_MAX_DOUBLINGS}·{s0}")))?;
    let mut d = if lo == hi { hi } else { root::bisect(lo, hi, DN_REL_TOL, done) };

    // g ≥ Σc²/s² > 1 below √Σc², so only [s0, D] can hide an earlier crossing
    if d > s0 {
        let ratio = (d / s0).ln() / (SCAN_POINTS - 1) as f64;
        let mut prev = s0;
        for k in 1..SCAN_POINTS - 1 {
            let x = s0 * (ratio * k as f64).exp();
            if x >= d * (1.0 - DN_REL_TOL) {
                break;
            }
            if done(x) {
                d = root::bisect(prev, x, DN_REL_TOL, done);
                break;
            }
            prev = x;
        }
    }

    let residual = g.eval(d) - 1.0;
    Ok(NormalizerReport {
        d,
        method: Method::RootFind,
        residual,
        lower_bound_check: d * d >= sum_sq * (1.0 - 1e-12),
    })
}

/// `√(c_α H(η_n) n^{3−2α} L(n)²)`.
pub fn asymptotic_dn_regvar(alpha: f64, slow: SlowFactor, n: u64, model: TailModel) -> Result<NormalizerReport> {
    let c = calpha(alpha)?;
    let eta = model.eval_eta(n)?;
    let nf = n as f64;
    let l = slow.eval(nf);
    let d = (c * model.eval_h(eta) * nf.powf(3.0 - 2.0 * alpha) * l * l).sqrt();
    Ok(NormalizerReport { d, method: Method::Asymptotic, residual: f64::NAN, lower_bound_check: true })
}

/// Where the quadrature on `[1, ∞)` hands over to the analytic tail.
pub const CALPHA_SPLIT: f64 = 1e6;

/// `c_α = (1−α)^{−2} ∫_0^∞ [x^{1−α} − max(x−1, 0)^{1−α}]² dx`.
pub fn calpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (1/2, 1), got {alpha}")));
    }
    let beta = 1.0 - alpha;
    let head = 1.0 / (3.0 - 2.0 * alpha);
    let integrand = |x: f64| calpha_integrand(beta, x);
    let mut acc = Accumulator::new();
    // geometric pieces [1,2], [2,4], … keep the slowly decaying tail well resolved
    let mut a = 1.0;
    while a < CALPHA_SPLIT {
        let b = (2.0 * a).min(CALPHA_SPLIT);
        acc.add(quad::integrate(integrand, a, b, 1e-12, 1e-13, 4000)?.value);
        a = b;
    }
    acc.add(calpha_tail(alpha, CALPHA_SPLIT));
    Ok((head + acc.value()) / (beta * beta))
}

/// `[x^β − (x−1)^β]²` for `x ≥ 1`, written to avoid cancellation for large `x`.
pub(crate) fn calpha_integrand(beta: f64, x: f64) -> f64 {
    let diff = -x.powf(beta) * (beta * (-1.0 / x).ln_1p()).exp_m1();
    diff * diff
}

/// `∫_X^∞ [x^β − (x−1)^β]² dx` from the large-`x` expansion
/// `β² x^{−2α} (1 + (1−β)/x + …)`.
fn calpha_tail(alpha: f64, x: f64) -> f64 {
    let beta = 1.0 - alpha;
    beta * beta * x.powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0)
        + beta * beta * (1.0 - beta) * x.powf(-2.0 * alpha) / (2.0 * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BnEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// `√(π/2)` times the sample mean of `|S|`, with its standard error.
pub fn estimate_bn(samples: &[f64]) -> Result<BnEstimate> {
    if samples.is_empty() {
        return Err(Error::Empty("B_n samples"));
    }
    let k = (std::f64::consts::PI / 2.0).sqrt();
    let r = samples.len() as f64;
    let mean = sum::sum(samples.iter().map(|s| s.abs())) / r;
    let std_error = if samples.len() > 1 {
        let var = sum::sum(samples.iter().map(|s| (s.abs() - mean).powi(2))) / (r - 1.0);
        k * (var / r).sqrt()
    } else {
        f64::NAN
    };
    Ok(BnEstimate { value: k * mean, std_error, samples: samples.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{CoefficientSpec, LinearWindow};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Simpson on x = 1 + e^v, v ∈ [−40, ln 1e12], plus the leading tail term
    fn calpha_simpson(alpha: f64) -> f64 {
        let beta = 1.0 - alpha;
        let (a, b) = (-40.0f64, 1e12f64.ln());
        let steps = 400_000;
        let h = (b - a) / steps as f64;
        let f = |v: f64| {
            let e = v.exp();
            calpha_integrand(beta, 1.0 + e) * e
        };
        let mut acc = Accumulator::new();
        for i in 0..=steps {
            let w = if i == 0 || i == steps { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc.add(w * f(a + h * i as f64));
        }
        let x_end = 1.0f64 + 1e12;
        let tail = beta * beta * x_end.powf(1.0 - 2.0 * alpha) / (2.0 * alpha - 1.0);
        // the piece below x = 1 + e^{-40} is at most e^{-40(2β+1)}, negligible
        (1.0 / (3.0 - 2.0 * alpha) + acc.value() * h / 3.0 + tail) / (beta * beta)
    }

    #[test]
    fn calpha_dual_quadrature() {
        for (alpha, frozen) in [(0.6, 9.497340851305441), (0.75, 13.984306956224639), (0.9, 86.37166119671775)] {
            let c = calpha(alpha).unwrap();
            let s = calpha_simpson(alpha);
            assert!((c - s).abs() <= 1e-8, "alpha={alpha}: {c} vs {s}");
            assert_relative_eq!(c, frozen, max_relative = 1e-12);
        }
    }

    #[test]
    fn calpha_head_piece() {
        // the [0,1] piece of α = 0.75 is exactly 2/3, before the factor 16
        assert_eq!(1.0 / (3.0 - 2.0 * 0.75), 2.0 / 3.0);
        assert!(calpha(0.5).is_err());
        assert!(calpha(1.0).is_err());
    }

    #[test]
    fn calpha_grid_is_finite_positive_and_continuous() {
        let grid: Vec<f64> = (0..50).map(|i| 0.505 + 0.49 * i as f64 / 49.0).collect();
        let vals: Vec<f64> = grid.iter().map(|&a| calpha(a).unwrap()).collect();
        assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
        // c_α blows up like 1/(2α−1) and (1−α)^{-2} at the ends; compare the regular part
        let regular: Vec<f64> =
            grid.iter().zip(&vals).map(|(a, c)| c * (2.0 * a - 1.0) * (1.0 - a).powi(2)).collect();
        for w in regular.windows(2) {
            let rel = (w[1] - w[0]).abs() / w[0].min(w[1]);
            assert!(rel < 0.2, "{w:?}");
        }
    }

    #[test]
    fn dn_examples() {
        let ones = WeightArray::row(vec![1.0; 100]);
        assert_eq!(solve_dn(&ones, TailModel::Constant).unwrap().d, 10.0);
        let r = solve_dn(&WeightArray::row(vec![3.0]), TailModel::Constant).unwrap();
        assert_eq!(r.d, 3.0);
        assert!(r.lower_bound_check);
        let r = solve_dn(&ones, TailModel::Pareto2).unwrap();
        assert!((r.d - 25.44164916901812).abs() <= 1e-6, "{}", r.d);
        assert!(r.residual <= 0.0 && r.residual > -1e-6);
        assert!(r.lower_bound_check);
    }

    #[test]
    fn dn_errors() {
        assert!(matches!(solve_dn(&WeightArray::row(vec![0.0, 0.0]), TailModel::Pareto2), Err(Error::AllZeroWeights)));
        assert!(matches!(solve_dn(&WeightArray::row(vec![]), TailModel::Pareto2), Err(Error::Empty(_))));
    }

    #[test]
    fn dn_matches_eta_for_equal_weights() {
        for m in [7u64, 100, 10_000] {
            for model in TailModel::ALL {
                let d = solve_dn(&WeightArray::row(vec![1.0; m as usize]), model).unwrap().d;
                let eta = model.eval_eta(m).unwrap();
                assert_relative_eq!(d, eta, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn asymptotic_constant_model() {
        let r = asymptotic_dn_regvar(0.75, SlowFactor::Const, 10_000, TailModel::Constant).unwrap();
        let expect = calpha(0.75).unwrap().sqrt() * 10_000f64.powf(0.75);
        assert_relative_eq!(r.d, expect, max_relative = 1e-9);
        // α near 1 approaches the short-memory growth exponent 1/2
        let d = |n| asymptotic_dn_regvar(0.999, SlowFactor::Const, n, TailModel::Constant).unwrap().d;
        let slope = (d(1_000_000) / d(1_000)).ln() / 1000f64.ln();
        assert_relative_eq!(slope, 0.501, max_relative = 1e-9);
    }

    #[test]
    fn root_found_matches_asymptotic() {
        let spec = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap();
        let n = 100_000;
        let w = LinearWindow::build(&spec, n, TailModel::Pareto2, 0.1).unwrap();
        let d = solve_dn(&w.weights, TailModel::Pareto2).unwrap().d;
        let a = asymptotic_dn_regvar(0.75, SlowFactor::Const, n as u64, TailModel::Pareto2).unwrap().d;
        assert!((d / a - 1.0).abs() <= 0.10, "{d} vs {a}");
    }

    #[test]
    fn bn_examples() {
        let b = estimate_bn(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_relative_eq!(b.value, (std::f64::consts::PI / 2.0).sqrt());
        assert_eq!(b.std_error, 0.0);
        assert_eq!(estimate_bn(&[0.0; 5]).unwrap().value, 0.0);
        assert!(estimate_bn(&[]).is_err());
    }

    proptest! {
        #[test]
        fn infimum_property(values in prop::collection::vec(0.01f64..50.0, 1..40)) {
            let w = WeightArray::row(values);
            let g = ConditionSum::new(&w, TailModel::Pareto2).unwrap();
            let r = solve_dn(&w, TailModel::Pareto2).unwrap();
            prop_assert!(g.eval(r.d) <= 1.0);
            if r.d > 1.0 {
                prop_assert!(g.eval(r.d * (1.0 - 1e-6)) > 1.0);
            }
            prop_assert!(r.lower_bound_check);
        }

        #[test]
        fn constant_model_scales_exactly(values in prop::collection::vec(-5.0f64..5.0, 1..30), k in -3i32..6) {
            prop_assume!(values.iter().any(|v| *v != 0.0));
            let lambda = 2f64.powi(k);
            let base = solve_dn(&WeightArray::row(values.clone()), TailModel::Constant).unwrap().d;
            let scaled = solve_dn(&WeightArray::row(values.iter().map(|v| v * lambda).collect()), TailModel::Constant).unwrap().d;
            // D = max(1, √Σc²) for the constant model
            let expect = (base * lambda).max(1.0);
            if base > 1.0 && base * lambda > 1.0 {
                prop_assert!((scaled - expect).abs() <= 1e-12 * expect);
            }
        }
    }
}
