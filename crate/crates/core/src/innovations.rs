//! Innovation sequences with a common symmetric marginal and three kinds of
//! dependence: independent, martingale differences, and m-dependent.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::{self, Accumulator};
use crate::tail::TailModel;

fn default_window() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Flavor {
    Iid,
    /// `ξ_k = R_k · sign(ξ_{k-1}) · |V_k|` with a fair sign `R_k`.
    MdsSign,
    /// `ξ_k = f(Z_k, …, Z_{k+m})`: a Gaussian moving sum of window `m + 1`
    /// mapped through the model's quantile function.
    MDependent {
        #[serde(default = "default_window")]
        m: usize,
    },
    /// `ξ_k ≡ value`; a test hook with no randomness.
    Degenerate { value: f64 },
}

impl Flavor {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Flavor::MDependent { m: 0 } => {
                Err(Error::Config("m-dependent flavor needs a window m >= 1".into()))
            }
            Flavor::Degenerate { value } if !value.is_finite() => {
                Err(Error::Config("degenerate value must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Flavor::Iid => "iid",
            Flavor::MdsSign => "mds-sign",
            Flavor::MDependent { .. } => "m-dependent",
            Flavor::Degenerate { .. } => "degenerate",
        }
    }

    /// Whether `ξ_k²` is i.i.d., so the (M1) covariances vanish.
    pub fn has_iid_squares(&self) -> bool {
        matches!(self, Flavor::Iid | Flavor::MdsSign | Flavor::Degenerate { .. })
    }
}

#[derive(Debug, Clone)]
enum State {
    Iid,
    MdsSign { prev_negative: bool },
    MDependent { window: Vec<f64>, head: usize },
    Degenerate(f64),
}

/// A deterministic innovation sequence owned by one replication.
///
/// `(seed, stream_id, k)` determines `ξ_k`: the generator is ChaCha8 keyed by
/// the seed, with `stream_id` selecting one of its 2^64 independent streams.
#[derive(Debug, Clone)]
pub struct InnovationStream {
    model: TailModel,
    flavor: Flavor,
    rng: ChaCha8Rng,
    state: State,
}

impl InnovationStream {
    pub fn new(model: TailModel, flavor: Flavor, seed: u64, stream_id: u64) -> Result<Self> {
        flavor.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        let state = match flavor {
            Flavor::Iid => State::Iid,
            Flavor::MdsSign => State::MdsSign { prev_negative: false },
            Flavor::MDependent { m } => {
                let window = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                State::MDependent { window, head: 0 }
            }
            Flavor::Degenerate { value } => State::Degenerate(value),
        };
        Ok(InnovationStream { model, flavor, rng, state })
    }

    pub fn model(&self) -> TailModel {
        self.model
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    #[inline]
    pub fn next_value(&mut self) -> f64 {
        match &mut self.state {
            State::Iid => self.model.sample(&mut self.rng),
            State::MdsSign { prev_negative } => {
                let v = self.model.sample(&mut self.rng);
                let xi = if *prev_negative { -v } else { v };
                *prev_negative = xi < 0.0;
                xi
            }
            State::MDependent { window, head } => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                // G = (Z_k + … + Z_{k+m}) / √(m+1) is standard normal
                let m = window.len();
                let g = (sum::sum(window.iter().copied()) + z) / ((m + 1) as f64).sqrt();
                window[*head] = z;
                *head = (*head + 1) % m;
                // P(|N| > |G|) is uniform on (0, 1]
                let u = libm::erfc(g.abs() / std::f64::consts::SQRT_2).max(f64::MIN_POSITIVE);
                self.model.signed(u, g >= 0.0)
            }
            State::Degenerate(v) => *v,
        }
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for x in out {
            *x = self.next_value();
        }
    }

    pub fn take_vec(&mut self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        self.fill(&mut v);
        v
    }
}

impl Iterator for InnovationStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct M1Row {
    pub lag: usize,
    pub a: f64,
    pub b: f64,
    /// `cov(ξ_0² 1{|ξ_0|≤a}, ξ_k² 1{|ξ_k|≤b}) / (E[ξ²1{|ξ|≤a}] E[ξ²1{|ξ|≤b}])`
    pub normalized_cov: f64,
    pub std_error: f64,
}

impl M1Row {
    /// Whether the estimate is within `z` standard errors of zero.
    pub fn within(&self, z: f64) -> bool {
        self.normalized_cov.abs() <= z * self.std_error
    }
}

/// Monte Carlo estimates of the truncated-square covariances in (M1).
/// Lag 0 is allowed and gives the (positive) normalized variance.
pub fn check_m1(stream: &mut InnovationStream, lags: &[usize], truncations: &[(f64, f64)], steps: usize) -> Result<Vec<M1Row>> {
    if steps < 2 {
        return Err(Error::Domain("check_m1 needs at least 2 steps".into()));
    }
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let path = stream.take_vec(steps + max_lag);
    let trunc_sq = |x: f64, t: f64| if x.abs() <= t { x * x } else { 0.0 };
    let mut rows = Vec::with_capacity(lags.len() * truncations.len());
    for &lag in lags {
        for &(a, b) in truncations {
            let xs: Vec<f64> = path[..steps].iter().map(|&x| trunc_sq(x, a)).collect();
            let ys: Vec<f64> = path[lag..lag + steps].iter().map(|&x| trunc_sq(x, b)).collect();
            let nf = steps as f64;
            let mx = sum::sum(xs.iter().copied()) / nf;
            let my = sum::sum(ys.iter().copied()) / nf;
            let prods: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
            let cov = sum::sum(prods.iter().copied()) / nf;
            let var = sum::sum(prods.iter().map(|p| (p - cov).powi(2))) / (nf - 1.0);
            let scale = mx * my;
            rows.push(M1Row {
                lag,
                a,
                b,
                normalized_cov: cov / scale,
                std_error: (var / nf).sqrt() / scale,
            });
        }
    }
    Ok(rows)
}

/// Number of indicator thresholds in the ρ(1) dictionary.
pub const RHO_THRESHOLDS: usize = 16;

/// Largest canonical correlation between `(1{ξ_k ≤ q_i})_i` and
/// `(1{ξ_{k+1} ≤ q_i})_i` over 16 empirical-quantile thresholds: a lower
/// estimate of the maximal correlation ρ(1).
pub fn estimate_rho1(stream: &mut InnovationStream, steps: usize) -> Result<f64> {
    if steps < 100 {
        return Err(Error::Domain("estimate_rho1 needs at least 100 steps".into()));
    }
    let path = stream.take_vec(steps + 1);
    let mut sorted = path.clone();
    sorted.sort_by(f64::total_cmp);
    let q = RHO_THRESHOLDS;
    let thresholds: Vec<f64> =
        (1..=q).map(|i| sorted[(i * steps) / (q + 1)]).collect();

    let indicators = |x: f64| -> Vec<f64> { thresholds.iter().map(|&t| if x <= t { 1.0 } else { 0.0 }).collect() };
    let rows: Vec<Vec<f64>> = path.iter().map(|&x| indicators(x)).collect();
    let nf = steps as f64;
    let mean = |offset: usize| -> Vec<f64> {
        (0..q).map(|i| sum::sum(rows[offset..offset + steps].iter().map(|r| r[i])) / nf).collect()
    };
    let (mu, mv) = (mean(0), mean(1));
    let cov = |ou: usize, mu: &[f64], ov: usize, mv: &[f64]| -> DMatrix<f64> {
        DMatrix::from_fn(q, q, |i, j| {
            let mut acc = Accumulator::new();
            for t in 0..steps {
                acc.add((rows[t + ou][i] - mu[i]) * (rows[t + ov][j] - mv[j]));
            }
            acc.value() / nf
        })
    };
    let suu = cov(0, &mu, 0, &mu);
    let svv = cov(1, &mv, 1, &mv);
    let suv = cov(0, &mu, 1, &mv);
    let (iu, iv) = (inv_sqrt(suu)?, inv_sqrt(svv)?);
    let m = &iu * suv * &iv;
    let sv = m.singular_values();
    Ok(sv.iter().copied().fold(0.0, f64::max).min(1.0))
}

// symmetric inverse square root; near-singular directions (duplicate
// thresholds from atoms in the law) are dropped
fn inv_sqrt(s: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Domain("indicator covariance is zero; the sample is constant".into()));
    }
    let d = eig.eigenvalues.map(|l| if l > 1e-10 * top { 1.0 / l.sqrt() } else { 0.0 });
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose())
}
