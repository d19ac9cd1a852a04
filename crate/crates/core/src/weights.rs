//! Coefficient arrays: triangular rows `c_nk`, linear-process coefficients
//! `a_j`, the window sums `b_nj = a_{j+1} + … + a_{j+n}`, and the
//! summability conditions that the limit theorems are stated under.
//!
//! Index convention: the linear process is `X_k = Σ_j a_{k+j} ξ_j`, so that
//! `S_n = X_1 + … + X_n = Σ_j b_nj ξ_j`. Zero entries contribute zero to every
//! condition sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::sum::{self, Accumulator};
use crate::tail::TailModel;

/// Default relative bound on the condition mass dropped by truncation.
pub const DEFAULT_EPS_TAIL: f64 = 1e-6;
/// Largest window `window_sums` will build.
pub const MAX_WINDOW: usize = 100_000_000;
/// Default number of terms summed explicitly by [`check_coeff0`].
pub const DEFAULT_COEFF0_TERMS: u64 = 1_000_000;

/// Slowly varying factor of a regularly varying coefficient sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlowFactor {
    #[default]
    Const,
    /// `L(x) = (1 + ln x)^p`
    LnPower { p: f64 },
}

impl SlowFactor {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SlowFactor::Const => 1.0,
            SlowFactor::LnPower { p } => (1.0 + x.ln()).powf(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `a_start, a_{start+1}, …` from a finite list; zero elsewhere.
    Explicit {
        #[serde(default = "default_start")]
        start: i64,
        values: Vec<f64>,
    },
    /// `a_i = i^{-α} L(i)` for `i ≥ 1`.
    Regvar {
        alpha: f64,
        #[serde(default)]
        slow: SlowFactor,
    },
    /// `a_i = Γ(i+d) / (Γ(d) Γ(i+1))` for `i ≥ 0`.
    Fractional { d: f64 },
}

fn default_start() -> i64 {
    1
}

/// Decreasing upper envelope `a_i ≤ scale · i^{-decay} · L(i)` valid for `i ≥ from`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Envelope {
    scale: f64,
    decay: f64,
    log_power: f64,
    from: f64,
}

impl Envelope {
    fn eval(&self, x: f64) -> f64 {
        let l = if self.log_power == 0.0 { 1.0 } else { (1.0 + x.ln()).powf(self.log_power) };
        self.scale * x.powf(-self.decay) * l
    }
}

impl CoefficientSpec {
    pub fn explicit(start: i64, values: Vec<f64>) -> Result<Self> {
        let spec = CoefficientSpec::Explicit { start, values };
        spec.validate()?;
        Ok(spec)
    }

    pub fn regvar(alpha: f64, slow: SlowFactor) -> Result<Self> {
        let spec = CoefficientSpec::Regvar { alpha, slow };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fractional(d: f64) -> Result<Self> {
        let spec = CoefficientSpec::Fractional { d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoefficientSpec::Explicit { values, .. } => {
                if values.is_empty() {
                    return Err(Error::Domain("explicit coefficient list is empty".into()));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!("non-finite coefficient {v}")));
                }
            }
            CoefficientSpec::Regvar { alpha, slow } => {
                if !(*alpha > 0.5 && *alpha < 1.0) {
                    return Err(Error::Domain(format!("regvar alpha must lie in (1/2, 1), got {alpha}")));
                }
                if let SlowFactor::LnPower { p } = slow {
                    if !p.is_finite() {
                        return Err(Error::Domain("ln-power exponent must be finite".into()));
                    }
                }
            }
            CoefficientSpec::Fractional { d } => {
                if !(*d > 0.0 && *d < 0.5) {
                    return Err(Error::Domain(format!("fractional d must lie in (0, 1/2), got {d}")));
                }
            }
        }
        Ok(())
    }

    /// Smallest index with a (possibly) nonzero coefficient.
    pub fn first_index(&self) -> i64 {
        match self {
            CoefficientSpec::Explicit { start, .. } => *start,
            CoefficientSpec::Regvar { .. } => 1,
            CoefficientSpec::Fractional { .. } => 0,
        }
    }

    /// Largest index with a nonzero coefficient, `None` for infinite sequences.
    pub fn last_index(&self) -> Option<i64> {
        match self {
            CoefficientSpec::Explicit { start, values } => Some(start + values.len() as i64 - 1),
            _ => None,
        }
    }

    /// Coefficients `a_from, …, a_to` (inclusive); zero outside the support.
    pub fn coefficients(&self, from: i64, to: i64) -> Vec<f64> {
        if to < from {
            return Vec::new();
        }
        let len = (to - from + 1) as usize;
        match self {
            CoefficientSpec::Explicit { start, values } => (from..=to)
                .map(|i| {
                    let k = i - start;
                    if k >= 0 && (k as usize) < values.len() {
                        values[k as usize]
                    } else {
                        0.0
                    }
                })
                .collect(),
            CoefficientSpec::Regvar { alpha, slow } => (from..=to)
                .map(|i| {
                    if i < 1 {
                        0.0
                    } else {
                        let x = i as f64;
                        x.powf(-alpha) * slow.eval(x)
                    }
                })
                .collect(),
            CoefficientSpec::Fractional { d } => {
                let mut out = vec![0.0; len];
                if to >= 0 {
                    let head = fractional_recurrence(*d, to as usize + 1);
                    for i in from.max(0)..=to {
                        out[(i - from) as usize] = head[i as usize];
                    }
                }
                out
            }
        }
    }

    /// Upper envelope on the tail of an infinite sequence.
    pub(crate) fn envelope(&self) -> Option<Envelope> {
        match *self {
            CoefficientSpec::Explicit { .. } => None,
            CoefficientSpec::Regvar { alpha, slow } => {
                let (log_power, from) = match slow {
                    SlowFactor::Const => (0.0, 1.0),
                    // x^{-α}(1 + ln x)^p decreases once 1 + ln x > p/α
                    SlowFactor::LnPower { p } => (p, (p / alpha - 1.0).exp().max(1.0).ceil()),
                };
                Some(Envelope { scale: 1.0, decay: alpha, log_power, from })
            }
            CoefficientSpec::Fractional { d } => Some(Envelope {
                // a_i · i^{1-d} increases to 1/Γ(d)
                scale: 1.0 / libm::tgamma(d),
                decay: 1.0 - d,
                log_power: 0.0,
                from: 1.0,
            }),
        }
    }

    /// Long-memory specs are not absolutely summable.
    pub fn is_absolutely_summable(&self) -> bool {
        matches!(self, CoefficientSpec::Explicit { .. })
    }
}

fn fractional_recurrence(d: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut a = 1.0;
    for i in 0..count {
        if i > 0 {
            a *= (i as f64 - 1.0 + d) / i as f64;
        }
        out.push(a);
    }
    out
}

/// `a_0 … a_{count-1}` of `(1 - B)^{-d}` via `a_i = a_{i-1} (i - 1 + d) / i`.
pub fn fractional_coeffs(d: f64, count: usize) -> Result<Vec<f64>> {
    if !(d > 0.0 && d < 0.5) {
        return Err(Error::Domain(format!("fractional d must lie in (0, 1/2), got {d}")));
    }
    Ok(fractional_recurrence(d, count))
}

/// A finite weight row; `entries[0]` carries index `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightArray {
    pub entries: Vec<f64>,
    pub offset: i64,
    /// Bound on the dropped condition mass relative to the kept `Σ c²`.
    pub truncation_tail_bound: f64,
}

impl WeightArray {
    /// A triangular-array row `c_n1 … c_nm`.
    pub fn row(entries: Vec<f64>) -> Self {
        WeightArray { entries, offset: 1, truncation_tail_bound: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Weight at index `j`, zero outside the window.
    pub fn get(&self, j: i64) -> f64 {
        let k = j - self.offset;
        if k >= 0 && (k as usize) < self.entries.len() {
            self.entries[k as usize]
        } else {
            0.0
        }
    }

    pub fn sum_squares(&self) -> f64 {
        sum::sum(self.entries.iter().map(|c| c * c))
    }
}

/// The coefficients and window sums of one `S_n`, sharing a truncation.
#[derive(Debug, Clone)]
pub struct LinearWindow {
    pub n: usize,
    /// `a_i` for `i = coeff_offset, …`
    pub coeffs: Vec<f64>,
    pub coeff_offset: i64,
    pub weights: WeightArray,
}

impl LinearWindow {
    /// Builds `b_nj` for every `j` where it contributes. Infinite specs are
    /// truncated at the smallest `J` whose dropped condition mass
    /// `Σ_{j>J} b² H(1/|b|)` is at most `eps_tail · max(1, Σ_{j≤J} b²)`.
    pub fn build(spec: &CoefficientSpec, n: usize, model: TailModel, eps_tail: f64) -> Result<Self> {
        Self::build_capped(spec, n, model, eps_tail, MAX_WINDOW)
    }

    pub fn build_capped(
        spec: &CoefficientSpec,
        n: usize,
        model: TailModel,
        eps_tail: f64,
        max_window: usize,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be >= 1".into()));
        }
        if !(eps_tail > 0.0) {
            return Err(Error::Domain(format!("eps_tail must be positive, got {eps_tail}")));
        }
        spec.validate()?;
        let first = spec.first_index();
        let lo = first - n as i64;
        match spec.last_index() {
            Some(last) => {
                let coeffs = spec.coefficients(first, last);
                let entries = window_from_prefix(&prefix_sums(&coeffs), first, n, lo, last - 1);
                Ok(LinearWindow {
                    n,
                    coeffs,
                    coeff_offset: first,
                    weights: WeightArray { entries, offset: lo, truncation_tail_bound: 0.0 },
                })
            }
            None => build_truncated(spec, n, model, eps_tail, max_window),
        }
    }

    /// `b_nj`.
    pub fn b(&self, j: i64) -> f64 {
        self.weights.get(j)
    }

    /// `a_i` as kept by the truncation.
    pub fn a(&self, i: i64) -> f64 {
        let k = i - self.coeff_offset;
        if k >= 0 && (k as usize) < self.coeffs.len() {
            self.coeffs[k as usize]
        } else {
            0.0
        }
    }

    /// Weight of `ξ_{n-i}` in the causal indexing `S_n = Σ_{i≥1} b_ni ξ_{n-i}`,
    /// which is `b_{n, i-n}` here.
    pub fn causal_weight(&self, i: i64) -> f64 {
        self.b(i - self.n as i64)
    }
}

/// `window_sums`: the `b_nj` window alone.
pub fn window_sums(spec: &CoefficientSpec, n: usize, model: TailModel, eps_tail: f64) -> Result<WeightArray> {
    Ok(LinearWindow::build(spec, n, model, eps_tail)?.weights)
}

// prefix[t] = a_first + … + a_{first+t-1}
fn prefix_sums(coeffs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeffs.len() + 1);
    let mut acc = Accumulator::new();
    out.push(0.0);
    for &a in coeffs {
        acc.add(a);
        out.push(acc.value());
    }
    out
}

// b_nj = A_{j+n} - A_j for j in [lo, hi], with A_j = Σ_{i≤j} a_i.
fn window_from_prefix(prefix: &[f64], first: i64, n: usize, lo: i64, hi: i64) -> Vec<f64> {
    let kept = prefix.len() as i64 - 1;
    let cum = |j: i64| -> f64 {
        let t = (j - first + 1).clamp(0, kept);
        prefix[t as usize]
    };
    (lo..=hi).map(|j| cum(j + n as i64) - cum(j)).collect()
}

fn build_truncated(
    spec: &CoefficientSpec,
    n: usize,
    model: TailModel,
    eps_tail: f64,
    max_window: usize,
) -> Result<LinearWindow> {
    let env = spec.envelope().expect("infinite specs have an envelope");
    let first = spec.first_index();
    let lo = first - n as i64;
    let j_cap = lo + max_window as i64 - 1;
    let j_start = (n as i64).max(64).max(env.from as i64).max(first);
    let scale = n as f64;

    // Σ_{j>J} b² H(1/|b|) ≤ ∫_{J+1}^∞ φ(n·env(y)) dy with φ(y) = y² H(1/y)
    let tail = |j: i64| -> f64 {
        envelope_tail_integral(&env, scale, (j + 1) as f64, model, TailTerm::Condition)
            .unwrap_or(f64::INFINITY)
    };

    // give up early if even the largest window cannot meet the target
    if j_cap < j_start {
        return Err(Error::Truncation { target: eps_tail, achieved: f64::INFINITY, max_window });
    }
    let cap_tail = tail(j_cap);
    let b2_tail = |j: i64| -> f64 {
        envelope_tail_integral(&env, scale, (j + 1) as f64, model, TailTerm::Square)
            .unwrap_or(f64::INFINITY)
    };

    let mut hi = j_start;
    let mut coeffs = spec.coefficients(first, hi + n as i64);
    let mut prefix = prefix_sums(&coeffs);
    let mut kept_b2 = Accumulator::new();
    for b in window_from_prefix(&prefix, first, n, lo, hi) {
        kept_b2.add(b * b);
    }
    let mut lo_j = hi;
    loop {
        let dhat2 = kept_b2.value().max(1.0);
        if tail(hi) <= eps_tail * dhat2 {
            break;
        }
        let upper_dhat2 = (kept_b2.value() + b2_tail(hi)).max(1.0);
        if cap_tail > eps_tail * upper_dhat2 {
            return Err(Error::Truncation {
                target: eps_tail,
                achieved: cap_tail / upper_dhat2,
                max_window,
            });
        }
        if hi >= j_cap {
            return Err(Error::Truncation { target: eps_tail, achieved: tail(hi) / dhat2, max_window });
        }
        lo_j = hi;
        let next = (hi * 2).min(j_cap);
        extend_coeffs(spec, &mut coeffs, first, next + n as i64);
        prefix = prefix_sums(&coeffs);
        for b in window_from_prefix(&prefix, first, n, hi + 1, next) {
            kept_b2.add(b * b);
        }
        hi = next;
    }

    // smallest J in (lo_j, hi] meeting the criterion
    let mut best = hi;
    if lo_j < hi {
        let region = window_from_prefix(&prefix, first, n, lo, hi);
        let mut cum = Vec::with_capacity(region.len());
        let mut acc = Accumulator::new();
        for &b in &region {
            acc.add(b * b);
            cum.push(acc.value());
        }
        let kept_at = |j: i64| cum[(j - lo) as usize].max(1.0);
        let (mut a, mut b) = (lo_j, hi);
        while b - a > 1 {
            let mid = a + (b - a) / 2;
            if tail(mid) <= eps_tail * kept_at(mid) {
                b = mid;
            } else {
                a = mid;
            }
        }
        best = b;
    }

    let entries = window_from_prefix(&prefix, first, n, lo, best);
    let kept = sum::sum(entries.iter().map(|b| b * b)).max(1.0);
    let bound = tail(best) / kept;
    coeffs.truncate((best + n as i64 - first + 1) as usize);
    Ok(LinearWindow {
        n,
        coeffs,
        coeff_offset: first,
        weights: WeightArray { entries, offset: lo, truncation_tail_bound: bound },
    })
}

fn extend_coeffs(spec: &CoefficientSpec, coeffs: &mut Vec<f64>, first: i64, to: i64) {
    let have = first + coeffs.len() as i64 - 1;
    if to <= have {
        return;
    }
    match spec {
        CoefficientSpec::Fractional { d } => {
            let mut i = coeffs.len() as i64 + first;
            let mut a = *coeffs.last().expect("nonempty");
            while i <= to {
                a *= (i as f64 - 1.0 + d) / i as f64;
                coeffs.push(a);
                i += 1;
            }
        }
        _ => coeffs.extend(spec.coefficients(have + 1, to)),
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum TailTerm {
    /// `y² H(1/y)`
    Condition,
    /// `y²`
    Square,
}

/// Upper bound on `∫_{lower}^∞ term(scale · env(y)) dy`, or `None` when the
/// integral diverges (`2·decay ≤ 1`).
pub(crate) fn envelope_tail_integral(
    env: &Envelope,
    scale: f64,
    lower: f64,
    model: TailModel,
    term: TailTerm,
) -> Option<f64> {
    let gamma = env.decay;
    if 2.0 * gamma <= 1.0 {
        return None;
    }
    let lower = lower.max(env.from);
    let eval_term = |y: f64| match term {
        TailTerm::Condition => model.condition_term(y),
        TailTerm::Square => y * y,
    };
    // y = lower · e^v turns the power decay into exponential decay in v
    let integrand = |v: f64| {
        let y = lower * v.exp();
        eval_term(scale * env.eval(y)) * y
    };
    let v_max = (60.0 / (2.0 * gamma - 1.0)).min((1e250 / lower).ln()).max(1.0);
    let mut total = 0.0;
    let mut a = 0.0;
    let mut width = 0.5;
    while a < v_max {
        let b = (a + width).min(v_max);
        let q = quad::integrate(integrand, a, b, 0.0, 1e-10, 2000).ok()?;
        total += q.value + q.abs_error;
        a = b;
        width *= 2.0;
    }
    // remainder beyond x_far from H(x) ≤ C max(1,x)^δ and ln-power growth bounds
    let x_far = lower * v_max.exp();
    let delta = 0.1f64.min((2.0 * gamma - 1.0) / (2.0 * gamma));
    let (c, expo) = match term {
        TailTerm::Condition => (model.power_bound(delta), 2.0 - delta),
        TailTerm::Square => (1.0, 2.0),
    };
    let y_far = scale * env.eval(x_far);
    if y_far > 1.0 {
        return None;
    }
    let ln_far = 1.0 + x_far.ln();
    let q = if env.log_power > 0.0 { env.log_power * expo / ln_far } else { 0.0 };
    let beta = gamma * expo - q;
    if beta <= 1.0 {
        return None;
    }
    // ∫_X^∞ c (s K)^e (1+ln X)^{pe} (y/X)^q y^{-γe} dy = c y_far^e X / (β - 1)
    let remainder = c * y_far.powf(expo) * x_far / (beta - 1.0);
    Some(total + remainder)
}

impl CoefficientSpec {
    /// `a(x)` extended to large real `x`, used for tail integrals.
    fn coefficient_at(&self, x: f64) -> f64 {
        match *self {
            CoefficientSpec::Explicit { .. } => unreachable!("explicit specs are summed directly"),
            CoefficientSpec::Regvar { alpha, slow } => x.powf(-alpha) * slow.eval(x),
            // Γ(x+d)/Γ(x+1) = x^{d-1}(1 + d(d-1)/(2x) + O(x^{-2})); only used for x ≥ 2^20
            CoefficientSpec::Fractional { d } => {
                x.powf(d - 1.0) * (1.0 + d * (d - 1.0) / (2.0 * x)) / libm::tgamma(d)
            }
        }
    }

    /// `A² = Σ_i a_i²`.
    ///
    /// Infinite sequences are summed exactly up to `2^20` and completed with
    /// the Euler–Maclaurin tail `∫_N^∞ a² + a(N)²/2 − (a²)'(N)/12`.
    pub fn square_sum(&self) -> Result<f64> {
        self.validate()?;
        if let CoefficientSpec::Explicit { values, .. } = self {
            return Ok(sum::sum(values.iter().map(|a| a * a)));
        }
        const N: i64 = 1 << 20;
        let first = self.first_index();
        let head = sum::sum(self.coefficients(first, N - 1).into_iter().map(|a| a * a));
        let f = |x: f64| self.coefficient_at(x).powi(2);
        let nf = N as f64;
        let h = 1e-2 * nf;
        let deriv = (f(nf + h) - f(nf - h)) / (2.0 * h);
        // x = N e^v; decay is at least x^{-1-}, so v up to ~700/(2γ-1) covers it
        let gamma = self.envelope().expect("infinite spec").decay;
        let v_max = (700.0 / (2.0 * gamma - 1.0)).min(600.0);
        let integrand = |v: f64| {
            let x = nf * v.exp();
            f(x) * x
        };
        let mut integral = 0.0;
        let (mut a, mut width) = (0.0, 0.5);
        while a < v_max {
            let b = (a + width).min(v_max);
            integral += quad::integrate(integrand, a, b, 1e-13 * head, 1e-12, 2000)?.value;
            a = b;
            width *= 2.0;
        }
        Ok(head + integral + f(nf) / 2.0 - deriv / 12.0)
    }

    /// `Σ_i a_i`, defined only for absolutely summable (finite) sequences.
    pub fn absolute_sum_checked(&self) -> Result<f64> {
        match self {
            CoefficientSpec::Explicit { values, .. } => Ok(sum::sum(values.iter().copied())),
            other => Err(Error::NotSummable(format!(
                "{} coefficients decay like i^-{} and are not absolutely summable",
                other.kind_name(),
                other.envelope().map(|e| e.decay).unwrap_or(f64::NAN)
            ))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CoefficientSpec::Explicit { .. } => "explicit",
            CoefficientSpec::Regvar { .. } => "regvar",
            CoefficientSpec::Fractional { .. } => "fractional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coeff0Check {
    pub converges: bool,
    /// `Σ a_j² H(1/|a_j|)` over the explicitly summed terms.
    pub partial: f64,
    /// Upper bound on the remaining terms; `∞` when none can be established.
    pub tail_bound: f64,
    pub terms: u64,
}

/// Existence condition `Σ_j a_j² H(1/|a_j|) < ∞` for the linear process.
pub fn check_coeff0(spec: &CoefficientSpec, model: TailModel, terms: u64) -> Coeff0Check {
    if let CoefficientSpec::Explicit { values, .. } = spec {
        let partial = sum::sum(values.iter().map(|&a| model.condition_term(a)));
        return Coeff0Check { converges: partial.is_finite(), partial, tail_bound: 0.0, terms: values.len() as u64 };
    }
    let first = spec.first_index();
    let last = first + terms.max(1) as i64 - 1;
    let partial = partial_condition_sum(spec, model, first, last);
    let tail_bound = match spec.envelope() {
        Some(env) if (last as f64) >= env.from => {
            envelope_tail_integral(&env, 1.0, last as f64, model, TailTerm::Condition)
                .unwrap_or(f64::INFINITY)
        }
        _ => f64::INFINITY,
    };
    Coeff0Check {
        converges: partial.is_finite() && tail_bound.is_finite(),
        partial,
        tail_bound,
        terms: (last - first + 1) as u64,
    }
}

// chunked so that 1e7+ terms never sit in memory at once
fn partial_condition_sum(spec: &CoefficientSpec, model: TailModel, first: i64, last: i64) -> f64 {
    let mut acc = Accumulator::new();
    match spec {
        CoefficientSpec::Fractional { d } => {
            let mut a = 1.0;
            for i in first..=last {
                if i > 0 {
                    a *= (i as f64 - 1.0 + d) / i as f64;
                }
                acc.add(model.condition_term(a));
            }
        }
        _ => {
            const CHUNK: i64 = 1 << 16;
            let mut from = first;
            while from <= last {
                let to = (from + CHUNK - 1).min(last);
                for a in spec.coefficients(from, to) {
                    acc.add(model.condition_term(a));
                }
                from = to + 1;
            }
        }
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenCheck {
    /// `Σ_k c_k² H(1/|c_k|)`
    pub sum_cond: f64,
    /// `max_k c_k² H(1/|c_k|)`
    pub max_cond: f64,
}

pub fn check_gen(weights: &WeightArray, model: TailModel) -> GenCheck {
    let mut acc = Accumulator::new();
    let mut max_cond = 0.0f64;
    for &c in &weights.entries {
        let t = model.condition_term(c);
        acc.add(t);
        max_cond = max_cond.max(t);
    }
    GenCheck { sum_cond: acc.value(), max_cond }
}

/// `max_k (c_k²/D²) H(D/|c_k|)`.
pub fn check_coeffd(weights: &WeightArray, model: TailModel, d: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::Domain(format!("normalizer D must be >= 1, got {d}")));
    }
    Ok(weights
        .entries
        .iter()
        .map(|&c| model.condition_term(c / d))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // b_nj by the definition, one term at a time
    fn brute_b(values: &[f64], start: i64, n: usize, j: i64) -> f64 {
        (j + 1..=j + n as i64)
            .map(|i| {
                let k = i - start;
                if k >= 0 && (k as usize) < values.len() { values[k as usize] } else { 0.0 }
            })
            .sum()
    }

    #[test]
    fn fractional_head() {
        let a = fractional_coeffs(0.25, 3).unwrap();
        assert_eq!(a, vec![1.0, 0.25, 0.15625]);
        assert!(fractional_coeffs(0.5, 3).is_err());
        assert!(fractional_coeffs(0.0, 3).is_err());
    }

    #[test]
    fn fractional_matches_log_gamma_ratio() {
        let d = 0.3;
        let a = fractional_coeffs(d, 200).unwrap();
        for (i, &ai) in a.iter().enumerate() {
            let x = i as f64;
            let oracle = (libm::lgamma(x + d) - libm::lgamma(d) - libm::lgamma(x + 1.0)).exp();
            assert_relative_eq!(ai, oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn fractional_asymptotics() {
        for d in [0.1, 0.25, 0.4] {
            let a = fractional_coeffs(d, 100_001).unwrap();
            let n = 100_000f64;
            let r = a[100_000] * libm::tgamma(d) * n.powf(1.0 - d);
            assert!((0.99..=1.01).contains(&r), "d={d}: {r}");
        }
    }

    #[test]
    fn explicit_window_example() {
        let spec = CoefficientSpec::explicit(1, vec![1.0, 1.0]).unwrap();
        let w = LinearWindow::build(&spec, 2, TailModel::Pareto2, 1e-6).unwrap();
        assert_eq!(w.weights.offset, -1);
        assert_eq!(w.b(0), 2.0);
        assert_eq!(w.b(-1), 1.0);
        assert_eq!(w.b(1), 1.0);
        assert_eq!(w.weights.entries.len(), 3);
        assert_eq!(w.weights.truncation_tail_bound, 0.0);
    }

    #[test]
    fn n_one_is_shifted_coefficients() {
        let values = vec![0.5, -1.0, 2.0, 0.25];
        let spec = CoefficientSpec::explicit(3, values.clone()).unwrap();
        let w = LinearWindow::build(&spec, 1, TailModel::Pareto2, 1e-6).unwrap();
        for j in 0..10 {
            assert_eq!(w.b(j), spec.coefficients(j + 1, j + 1)[0]);
        }
    }

    #[test]
    fn causal_fractional_weights() {
        let spec = CoefficientSpec::fractional(0.25).unwrap();
        let w = LinearWindow::build_capped(&spec, 3, TailModel::Pareto2, 0.5, 10_000).unwrap();
        assert_relative_eq!(w.a(1) + w.a(2), 0.40625, max_relative = 1e-15);
        // a_0 = 1 belongs to the fractional filter, so the causal weight picks it up
        assert_relative_eq!(w.causal_weight(2), 1.40625, max_relative = 1e-15);
        assert_relative_eq!(w.causal_weight(5), w.a(3) + w.a(4) + w.a(5), max_relative = 1e-14);
    }

    #[test]
    fn truncation_meets_its_bound() {
        let spec = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap();
        let w = LinearWindow::build(&spec, 100, TailModel::Pareto2, 0.05).unwrap();
        assert!(w.weights.truncation_tail_bound <= 0.05);
        // one entry shorter would violate the criterion
        let shorter = LinearWindow::build_capped(&spec, 100, TailModel::Pareto2, 0.05, w.weights.len() - 1);
        assert!(shorter.is_err());
    }

    #[test]
    fn truncation_bound_dominates_the_actual_dropped_mass() {
        let spec = CoefficientSpec::regvar(0.8, SlowFactor::Const).unwrap();
        let model = TailModel::Pareto2;
        let w = LinearWindow::build(&spec, 50, model, 0.1).unwrap();
        let j_end = w.weights.offset + w.weights.len() as i64 - 1;
        // brute force the dropped mass over a long stretch beyond the window
        let far = spec.coefficients(1, j_end + 50 + 4_000_000);
        let mut pre = vec![0.0];
        for a in &far {
            pre.push(pre.last().unwrap() + a);
        }
        let dropped: f64 = (j_end + 1..j_end + 4_000_000)
            .map(|j| model.condition_term(pre[(j + 50) as usize] - pre[j as usize]))
            .sum();
        let kept = w.weights.sum_squares();
        assert!(dropped / kept <= w.weights.truncation_tail_bound);
    }

    #[test]
    fn unreachable_tolerance_is_reported() {
        let spec = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap();
        match LinearWindow::build(&spec, 10_000, TailModel::Pareto2, 1e-6) {
            Err(Error::Truncation { achieved, max_window, .. }) => {
                assert_eq!(max_window, MAX_WINDOW);
                assert!(achieved > 1e-3, "{achieved}");
            }
            other => panic!("expected truncation failure, got {other:?}"),
        }
    }

    #[test]
    fn sum_of_squares_grows() {
        for spec in [
            CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap(),
            CoefficientSpec::regvar(0.7, SlowFactor::LnPower { p: 1.0 }).unwrap(),
            CoefficientSpec::fractional(0.25).unwrap(),
        ] {
            let s: Vec<f64> = [100, 1000, 10_000]
                .iter()
                .map(|&n| window_sums(&spec, n, TailModel::Pareto2, 0.5).unwrap().sum_squares())
                .collect();
            assert!(s[0] < s[1] && s[1] < s[2], "{spec:?}: {s:?}");
        }
    }

    #[test]
    fn coeff0_regvar_converges() {
        let spec = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap();
        let c = check_coeff0(&spec, TailModel::Pareto2, 10_000_000);
        assert!(c.converges);
        assert!(c.tail_bound.is_finite() && c.tail_bound > 0.0);
        // the partial sum is already close to its limit; the bound must cover the gap
        let c_short = check_coeff0(&spec, TailModel::Pareto2, 100_000);
        assert!(c_short.partial + c_short.tail_bound >= c.partial);
    }

    #[test]
    fn coeff0_half_exponent_diverges() {
        // α = 1/2 violates the regvar invariant; the check still reports it
        let spec = CoefficientSpec::Regvar { alpha: 0.5, slow: SlowFactor::Const };
        let partials: Vec<f64> = [1_000u64, 100_000, 10_000_000]
            .iter()
            .map(|&j| {
                let c = check_coeff0(&spec, TailModel::Pareto2, j);
                assert!(!c.converges);
                assert!(c.tail_bound.is_infinite());
                c.partial
            })
            .collect();
        // terms ~ (2 ln j^{1/2}) / j = ln j / j, so partial sums grow like ln² J / 2
        for (p, j) in partials.iter().zip([1e3f64, 1e5, 1e7]) {
            let ratio = p / (j.ln().powi(2) / 2.0);
            assert!((0.7..1.3).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn coeff0_explicit_is_finite() {
        let spec = CoefficientSpec::explicit(0, vec![1.0, 0.0, -0.5]).unwrap();
        let c = check_coeff0(&spec, TailModel::Pareto2, 10);
        assert!(c.converges);
        assert_eq!(c.tail_bound, 0.0);
    }

    #[test]
    fn gen_examples() {
        let n = 10_000;
        let row = WeightArray::row(vec![1.0 / (n as f64).sqrt(); n]);
        let g = check_gen(&row, TailModel::Constant);
        assert_relative_eq!(g.sum_cond, 1.0, max_relative = 1e-12);
        assert_relative_eq!(g.max_cond, 1.0 / n as f64, max_relative = 1e-12);
        let g = check_gen(&row, TailModel::Pareto2);
        assert_relative_eq!(g.sum_cond, 2.0 * 100f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(g.max_cond, g.sum_cond / n as f64, max_relative = 1e-12);
        let zero = check_gen(&WeightArray::row(vec![0.0]), TailModel::Pareto2);
        assert_eq!((zero.sum_cond, zero.max_cond), (0.0, 0.0));
    }

    #[test]
    fn coeffd_examples() {
        let row = WeightArray::row(vec![1.0; 100]);
        assert_relative_eq!(check_coeffd(&row, TailModel::Constant, 10.0).unwrap(), 0.01);
        assert_eq!(check_coeffd(&WeightArray::row(vec![0.0]), TailModel::Pareto2, 3.0).unwrap(), 0.0);
        assert!(check_coeffd(&row, TailModel::Pareto2, 0.5).is_err());
        // equal weights with D from the pareto2 normalizer at n = 1e4
        let row = WeightArray::row(vec![1.0; 10_000]);
        let v = check_coeffd(&row, TailModel::Pareto2, 341.5715815545309).unwrap();
        assert!(v <= 1e-3, "{v}");
    }

    #[test]
    fn square_sums_match_closed_forms() {
        // Σ i^{-1.5} = ζ(1.5)
        let s = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap().square_sum().unwrap();
        assert_relative_eq!(s, 2.612375348685488, max_relative = 1e-10);
        // Σ a_i² = Γ(1-2d)/Γ(1-d)²
        for d in [0.1, 0.25, 0.4] {
            let s = CoefficientSpec::fractional(d).unwrap().square_sum().unwrap();
            let closed = libm::tgamma(1.0 - 2.0 * d) / libm::tgamma(1.0 - d).powi(2);
            assert_relative_eq!(s, closed, max_relative = 1e-9);
        }
        let s = CoefficientSpec::explicit(1, vec![1.0, 1.0]).unwrap().square_sum().unwrap();
        assert_eq!(s, 2.0);
    }

    #[test]
    fn absolute_sum_requires_finite_support() {
        let g = CoefficientSpec::explicit(1, (1..=60).map(|i| 0.5f64.powi(i)).collect()).unwrap();
        assert_relative_eq!(g.absolute_sum_checked().unwrap(), 1.0, max_relative = 1e-15);
        let r = CoefficientSpec::regvar(0.75, SlowFactor::Const).unwrap();
        assert!(matches!(r.absolute_sum_checked(), Err(Error::NotSummable(_))));
    }

    fn small_values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -3.0f64..3.0], 1..20)
    }

    proptest! {
        #[test]
        fn prefix_identity(values in small_values(), start in -5i64..5, n in 1usize..8) {
            let spec = CoefficientSpec::explicit(start, values.clone()).unwrap();
            let w = LinearWindow::build(&spec, n, TailModel::Pareto2, 1e-6).unwrap();
            let lo = w.weights.offset;
            let hi = lo + w.weights.len() as i64 - 1;
            for j in lo..hi {
                let lhs = w.b(j + 1) - w.b(j);
                let rhs = w.a(j + n as i64 + 1) - w.a(j + 1);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
            for j in lo - 2..=hi + 2 {
                let b = brute_b(&values, start, n, j);
                prop_assert!((w.b(j) - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn additivity(values in small_values(), n in 1usize..6, m in 1usize..6) {
            let spec = CoefficientSpec::explicit(1, values).unwrap();
            let wn = LinearWindow::build(&spec, n, TailModel::Pareto2, 1e-6).unwrap();
            let wm = LinearWindow::build(&spec, m, TailModel::Pareto2, 1e-6).unwrap();
            let wnm = LinearWindow::build(&spec, n + m, TailModel::Pareto2, 1e-6).unwrap();
            for j in -15i64..25 {
                let lhs = wnm.b(j);
                let rhs = wn.b(j) + wm.b(j + n as i64);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }

        #[test]
        fn checkers_match_brute_force(values in small_values(), which in 0usize..3) {
            let model = TailModel::ALL[which];
            let spec = CoefficientSpec::explicit(1, values.clone()).unwrap();
            let mut brute = 0.0;
            let mut brute_max = 0.0f64;
            for &a in &values {
                let t = if a == 0.0 { 0.0 } else { a * a * model.eval_h(1.0 / a.abs()) };
                brute += t;
                brute_max = brute_max.max(t);
            }
            let c0 = check_coeff0(&spec, model, 100);
            let g = check_gen(&WeightArray::row(values), model);
            let tol = 1e-12 * brute.abs().max(1e-300);
            prop_assert!((c0.partial - brute).abs() <= tol);
            prop_assert!((g.sum_cond - brute).abs() <= tol);
            prop_assert_eq!(g.max_cond, brute_max);
        }

        #[test]
        fn fractional_positive_decreasing(d in 0.001f64..0.499) {
            let a = fractional_coeffs(d, 500).unwrap();
            prop_assert!(a.iter().all(|&x| x > 0.0));
            prop_assert!(a[1..].windows(2).all(|w| w[1] < w[0]));
        }
    }
}
