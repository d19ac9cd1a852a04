//! Statistics of one simulated path: weighted sums, linear-process partial
//! sums in two representations, the Raikov self-normalizer, the Kulik
//! statistic and the Peligrad–Sang ratio.

use serde::Serialize;

use crate::conv::Filter;
use crate::error::{Error, Result};
use crate::innovations::InnovationStream;
use crate::normalizer::calpha;
use crate::sum::Accumulator;
use crate::weights::{CoefficientSpec, LinearWindow, WeightArray};

/// Relative agreement required between the path and window forms of `S_n`.
pub const REPRESENTATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathStatistics {
    /// `Σ c_k ξ_k`
    #[serde(rename = "S")]
    pub s: f64,
    /// `(Σ c_k² ξ_k²)^{1/2}`
    #[serde(rename = "V_raikov")]
    pub v_raikov: f64,
    /// `(Σ_{i≤n} X_i²)^{1/2}`; only for linear processes with the path form on.
    #[serde(rename = "V_path")]
    pub v_path: Option<f64>,
    /// `S / D`
    #[serde(rename = "T_D")]
    pub t_d: Option<f64>,
    /// `S / V_raikov`; undefined when `V_raikov = 0`.
    #[serde(rename = "T_self")]
    pub t_self: Option<f64>,
    /// `(V_raikov / D)²`
    #[serde(rename = "ratio_LLN")]
    pub ratio_lln: Option<f64>,
}

impl PathStatistics {
    pub fn from_sums(s: f64, v_raikov_sq: f64, v_path: Option<f64>, d: Option<f64>) -> Self {
        let v_raikov = v_raikov_sq.sqrt();
        PathStatistics {
            s,
            v_raikov,
            v_path,
            t_d: d.map(|d| s / d),
            t_self: (v_raikov > 0.0).then(|| s / v_raikov),
            ratio_lln: d.map(|d| (v_raikov / d).powi(2)),
        }
    }
}

/// `Σ c_k ξ_k` with one draw per index, zero weights included.
pub fn weighted_sum(weights: &WeightArray, stream: &mut InnovationStream, d: Option<f64>) -> PathStatistics {
    let mut s = Accumulator::new();
    let mut v2 = Accumulator::new();
    for &c in &weights.entries {
        let x = stream.next_value();
        s.add(c * x);
        v2.add((c * x) * (c * x));
    }
    PathStatistics::from_sums(s.value(), v2.value(), None, d)
}

/// [`weighted_sum`] on a supplied innovation path.
pub fn weighted_sum_from(weights: &WeightArray, xi: &[f64], d: Option<f64>) -> PathStatistics {
    assert_eq!(weights.len(), xi.len(), "one innovation per weight");
    let mut s = Accumulator::new();
    let mut v2 = Accumulator::new();
    for (&c, &x) in weights.entries.iter().zip(xi) {
        s.add(c * x);
        v2.add((c * x) * (c * x));
    }
    PathStatistics::from_sums(s.value(), v2.value(), None, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    /// Compute `X_1..X_n` too, check it against the window form, fill `V_path`.
    #[default]
    Verify,
    /// Window form only; `V_path` is left undefined.
    WindowOnly,
}

/// A truncated linear process ready to simulate many paths of `S_n`.
#[derive(Debug, Clone)]
pub struct LinearProcess {
    window: LinearWindow,
    filter: Option<Filter>,
}

impl LinearProcess {
    pub fn new(window: LinearWindow, mode: PathMode) -> Self {
        let filter = match mode {
            PathMode::Verify => Some(Filter::new(&window.coeffs, window.n)),
            PathMode::WindowOnly => None,
        };
        LinearProcess { window, filter }
    }

    /// Forces the direct or FFT evaluation of the path form.
    pub fn with_filter(window: LinearWindow, fft: bool) -> Self {
        let filter = if fft {
            Filter::fft(&window.coeffs, window.n)
        } else {
            Filter::direct(&window.coeffs, window.n)
        };
        LinearProcess { window, filter: Some(filter) }
    }

    pub fn window(&self) -> &LinearWindow {
        &self.window
    }

    /// Number of innovations one path consumes.
    pub fn innovations_needed(&self) -> usize {
        self.window.weights.len()
    }

    pub fn simulate(&self, stream: &mut InnovationStream, d: Option<f64>) -> Result<PathStatistics> {
        let xi = stream.take_vec(self.innovations_needed());
        self.simulate_from(&xi, d)
    }

    /// `xi[t]` is `ξ_j` for `j = offset + t`, where `offset` is the window's first index.
    pub fn simulate_from(&self, xi: &[f64], d: Option<f64>) -> Result<PathStatistics> {
        let window_form = weighted_sum_from(&self.window.weights, xi, d);
        let Some(filter) = &self.filter else {
            return Ok(window_form);
        };
        let xs = self.path(filter, xi);
        let mut s = Accumulator::new();
        let mut v2 = Accumulator::new();
        for &x in &xs {
            s.add(x);
            v2.add(x * x);
        }
        let s_path = s.value();
        let scale = window_form.s.abs().max(window_form.v_raikov);
        if (s_path - window_form.s).abs() > REPRESENTATION_TOL * scale {
            return Err(Error::RepresentationMismatch { path: s_path, window: window_form.s });
        }
        Ok(PathStatistics { v_path: Some(v2.value().sqrt()), ..window_form })
    }

    /// `X_1, …, X_n` with `X_k = Σ_j a_{k+j} ξ_j` over the kept window.
    pub fn path_values(&self, xi: &[f64]) -> Vec<f64> {
        let filter = self
            .filter
            .clone()
            .unwrap_or_else(|| Filter::new(&self.window.coeffs, self.window.n));
        self.path(&filter, xi)
    }

    fn path(&self, filter: &Filter, xi: &[f64]) -> Vec<f64> {
        // with offset = first - n, a_{k+j} sits at coeffs[t - (n - k)], so X_{n-r} = y_r
        let mut ys = filter.apply(xi);
        ys.reverse();
        ys
    }
}

/// One-shot [`LinearProcess`] simulation.
pub fn linear_process_path(
    spec: &CoefficientSpec,
    n: usize,
    stream: &mut InnovationStream,
    eps_tail: f64,
    d: Option<f64>,
) -> Result<PathStatistics> {
    let window = LinearWindow::build(spec, n, stream.model(), eps_tail)?;
    LinearProcess::new(window, PathMode::Verify).simulate(stream, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KulikStatistic {
    pub t_kulik: f64,
    /// `(Σ a_i)² / Σ a_i²`
    pub target_var: f64,
}

/// `(Σ a)² / Σ a²` for an absolutely summable spec.
pub fn kulik_target_variance(spec: &CoefficientSpec) -> Result<f64> {
    let total = spec.absolute_sum_checked()?;
    Ok(total * total / spec.square_sum()?)
}

/// `S / V_path` and its limiting variance.
pub fn kulik_statistic(path: &PathStatistics, spec: &CoefficientSpec) -> Result<KulikStatistic> {
    let target_var = kulik_target_variance(spec)?;
    match path.v_path {
        Some(v) if v > 0.0 => Ok(KulikStatistic { t_kulik: path.s / v, target_var }),
        Some(_) => Err(Error::Domain("V_path is zero".into())),
        None => Err(Error::Domain("V_path was not computed (window-only mode)".into())),
    }
}

/// `A² Σ b_ni² ξ² / (c_α n² a_n² V_n²)` for a regularly varying spec.
#[derive(Debug, Clone, Copy)]
pub struct PeligradSang {
    scale: f64,
}

impl PeligradSang {
    pub fn new(spec: &CoefficientSpec, n: usize) -> Result<Self> {
        let CoefficientSpec::Regvar { alpha, .. } = *spec else {
            return Err(Error::Domain(format!(
                "the Peligrad-Sang ratio needs a regvar spec, got {}",
                spec.kind_name()
            )));
        };
        if n == 0 {
            return Err(Error::Domain("n must be >= 1".into()));
        }
        let a2 = spec.square_sum()?;
        let c = calpha(alpha)?;
        let a_n = spec.coefficients(n as i64, n as i64)[0];
        let nf = n as f64;
        Ok(PeligradSang { scale: a2 / (c * nf * nf * a_n * a_n) })
    }

    pub fn ratio(&self, path: &PathStatistics) -> Result<f64> {
        match path.v_path {
            Some(v) if v > 0.0 => Ok(self.scale * (path.v_raikov / v).powi(2)),
            _ => Err(Error::Domain("the Peligrad-Sang ratio needs V_path > 0".into())),
        }
    }
}

pub fn peligrad_sang_ratio(path: &PathStatistics, spec: &CoefficientSpec, n: usize) -> Result<f64> {
    PeligradSang::new(spec, n)?.ratio(path)
}
