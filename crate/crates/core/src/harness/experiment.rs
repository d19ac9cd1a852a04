use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{diagnostic_stream_id, stream_id, Check, ExperimentConfig, NormalizerChoice, WeightSource};
use crate::error::{Error, Result};
use crate::gof::{self, Summary};
use crate::innovations::{self, Flavor, InnovationStream, M1Row};
use crate::normalizer::{self, BnEstimate, NormalizerReport};
use crate::simulate::{self, LinearProcess, PathMode, PathStatistics, PeligradSang};
use crate::weights::{self, CoefficientSpec, Coeff0Check, GenCheck, LinearWindow, WeightArray};

pub const M1_LAGS: [usize; 3] = [1, 2, 5];
pub const M1_TRUNCATIONS: [(f64, f64); 2] = [(10.0, 10.0), (100.0, 100.0)];
pub const DIAGNOSTIC_STEPS: usize = 100_000;
/// Largest acceptable ρ(1) estimate for the m-dependent flavor.
pub const RHO1_LIMIT: f64 = 0.9;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the machine's parallelism.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofScores {
    pub ks: f64,
    pub cvm: f64,
    pub ks_critical_95: f64,
    /// Replicates with a defined statistic.
    pub scored: usize,
    pub undefined: usize,
}

impl GofScores {
    pub fn from_samples(samples: &[f64], undefined: usize) -> Result<Self> {
        Ok(GofScores {
            ks: gof::ks_normal(samples)?,
            cvm: gof::cvm_normal(samples)?,
            ks_critical_95: gof::ks_critical_95(samples.len()),
            scored: samples.len(),
            undefined,
        })
    }
}

/// Scores `r` exact standard-normal draws; calibrates the scorer itself.
pub fn calibration_scores(seed: u64, r: usize) -> Result<GofScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..r).map(|_| StandardNormal.sample(&mut rng)).collect();
    GofScores::from_samples(&samples, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowInfo {
    /// Index `j` of the first innovation `ξ_j` in the window.
    pub offset: i64,
    pub len: usize,
    pub truncation_tail_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rho1 {
    pub estimate: f64,
    pub below_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct InnovationChecks {
    #[serde(rename = "M1", skip_serializing_if = "Option::is_none")]
    pub m1: Option<Vec<M1Row>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho1: Option<Rho1>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct WeightChecks {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenCheck>,
    #[serde(rename = "coeffD", skip_serializing_if = "Option::is_none")]
    pub coeff_d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeff0: Option<Coeff0Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KulikSummary {
    pub target_var: f64,
    pub variance: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NResult {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowInfo>,
    pub normalizer: NormalizerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic_normalizer: Option<NormalizerReport>,
    #[serde(rename = "B_n")]
    pub b_n: BnEstimate,
    pub gof: GofScores,
    pub summary: Summary,
    #[serde(rename = "ratio_LLN")]
    pub ratio_lln: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kulik: Option<KulikSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peligrad_sang: Option<Summary>,
    pub checks: WeightChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: &'static str,
    pub statistic: &'static str,
    pub config: ExperimentConfig,
    pub innovation_checks: InnovationChecks,
    pub results: Vec<NResult>,
}

/// The report plus the per-replicate rows behind it.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// `(n, rows in replicate order)`
    pub replicates: Vec<(usize, Vec<PathStatistics>)>,
    /// The scored statistic per n, in replicate order (`None` when undefined).
    pub statistic: Vec<Vec<Option<f64>>>,
}

enum Built {
    Row(WeightArray),
    Linear(LinearProcess),
}

impl Built {
    fn weights(&self) -> &WeightArray {
        match self {
            Built::Row(w) => w,
            Built::Linear(lp) => &lp.window().weights,
        }
    }
}

fn build(config: &ExperimentConfig, n: usize) -> Result<Built> {
    let model = config.model.name;
    match &config.weights {
        WeightSource::Triangular { row } => Ok(Built::Row(row.build(n)?)),
        WeightSource::Linear { spec } => {
            let window = LinearWindow::build(spec, n, model, config.eps_tail)?;
            Ok(Built::Linear(LinearProcess::new(window, config.path_form)))
        }
    }
}

fn pool(opts: &RunOptions) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        if t == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Existence condition for the linear process; refuses to continue without it.
pub fn gate_coeff0(config: &ExperimentConfig) -> Result<Option<Coeff0Check>> {
    let WeightSource::Linear { spec } = &config.weights else {
        return Ok(None);
    };
    let c = weights::check_coeff0(spec, config.model.name, weights::DEFAULT_COEFF0_TERMS);
    if !c.converges {
        return Err(Error::Condition(format!(
            "Σ a_j² H(1/|a_j|) diverges for {spec:?}: the linear process does not exist"
        )));
    }
    Ok(Some(c))
}

pub fn innovation_checks(config: &ExperimentConfig) -> Result<InnovationChecks> {
    let mut out = InnovationChecks::default();
    let stream = || InnovationStream::new(config.model.name, config.innovations, config.seed, diagnostic_stream_id());
    if config.checks.contains(&Check::M1) {
        out.m1 = Some(innovations::check_m1(&mut stream()?, &M1_LAGS, &M1_TRUNCATIONS, DIAGNOSTIC_STEPS)?);
    }
    if let Flavor::MDependent { .. } = config.innovations {
        let estimate = innovations::estimate_rho1(&mut stream()?, DIAGNOSTIC_STEPS)?;
        out.rho1 = Some(Rho1 { estimate, below_limit: estimate <= RHO1_LIMIT });
    }
    Ok(out)
}

fn weight_checks(config: &ExperimentConfig, w: &WeightArray, d: f64, coeff0: Option<Coeff0Check>) -> Result<WeightChecks> {
    let model = config.model.name;
    let has = |c| config.checks.contains(&c);
    Ok(WeightChecks {
        gen: has(Check::Gen).then(|| weights::check_gen(w, model)),
        coeff_d: if has(Check::CoeffD) { Some(weights::check_coeffd(w, model, d)?) } else { None },
        coeff0: if has(Check::Coeff0) { coeff0 } else { None },
    })
}

fn asymptotic(config: &ExperimentConfig, n: usize) -> Result<Option<NormalizerReport>> {
    match &config.weights {
        WeightSource::Linear { spec: CoefficientSpec::Regvar { alpha, slow } } => {
            Ok(Some(normalizer::asymptotic_dn_regvar(*alpha, *slow, n as u64, config.model.name)?))
        }
        _ => Ok(None),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizerRow {
    pub n: usize,
    pub root_find: NormalizerReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asymptotic: Option<NormalizerReport>,
}

/// `D_n` for every n of the config, without simulating.
pub fn normalizer_table(config: &ExperimentConfig) -> Result<Vec<NormalizerRow>> {
    gate_coeff0(config)?;
    config
        .n
        .iter()
        .map(|&n| {
            let built = build(&ExperimentConfig { path_form: PathMode::WindowOnly, ..config.clone() }, n)?;
            Ok(NormalizerRow {
                n,
                root_find: normalizer::solve_dn(built.weights(), config.model.name)?,
                asymptotic: asymptotic(config, n)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub innovation_checks: InnovationChecks,
    pub results: Vec<(usize, WeightChecks)>,
}

/// The condition checks of the config, without simulating.
pub fn run_checks(config: &ExperimentConfig) -> Result<CheckReport> {
    let coeff0 = gate_coeff0(config)?;
    let lean = ExperimentConfig { path_form: PathMode::WindowOnly, ..config.clone() };
    let results = config
        .n
        .iter()
        .map(|&n| {
            let built = build(&lean, n)?;
            let d = normalizer::solve_dn(built.weights(), config.model.name)?.d;
            Ok((n, weight_checks(config, built.weights(), d, coeff0)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CheckReport { innovation_checks: innovation_checks(config)?, results })
}

pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    config.validate()?;
    let coeff0 = gate_coeff0(config)?;
    let pool = pool(opts)?;
    let model = config.model.name;
    let kulik_target = match &config.weights {
        WeightSource::Linear { spec } if spec.is_absolutely_summable() && config.path_form == PathMode::Verify => {
            Some(simulate::kulik_target_variance(spec)?)
        }
        _ => None,
    };

    let mut results = Vec::with_capacity(config.n.len());
    let mut replicates = Vec::with_capacity(config.n.len());
    let mut statistic = Vec::with_capacity(config.n.len());
    for (idx, &n) in config.n.iter().enumerate() {
        let built = build(config, n)?;
        let norm = normalizer::solve_dn(built.weights(), model)?;
        let d = norm.d;
        let rows: Vec<PathStatistics> = pool.install(|| {
            (0..config.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut s = InnovationStream::new(model, config.innovations, config.seed, stream_id(idx, rep))?;
                    match &built {
                        Built::Row(w) => Ok(simulate::weighted_sum(w, &mut s, Some(d))),
                        Built::Linear(lp) => lp.simulate(&mut s, Some(d)),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })?;

        let s_values: Vec<f64> = rows.iter().map(|r| r.s).collect();
        let b_n = normalizer::estimate_bn(&s_values)?;
        let stat: Vec<Option<f64>> = match config.normalizer {
            NormalizerChoice::Dn => rows.iter().map(|r| r.t_d).collect(),
            NormalizerChoice::SelfNormalized => rows.iter().map(|r| r.t_self).collect(),
            NormalizerChoice::Bn => rows.iter().map(|r| (b_n.value > 0.0).then(|| r.s / b_n.value)).collect(),
        };
        let defined: Vec<f64> = stat.iter().flatten().copied().collect();
        if defined.is_empty() {
            return Err(Error::Domain(format!("{} is undefined on every replicate at n = {n}", config.normalizer.statistic_name())));
        }
        let gof = GofScores::from_samples(&defined, stat.len() - defined.len())?;
        let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio_lln).collect();

        let kulik = match kulik_target {
            Some(target_var) => {
                let t: Vec<f64> = rows.iter().filter_map(|r| r.v_path.filter(|v| *v > 0.0).map(|v| r.s / v)).collect();
                let variance = gof::summarize(&t)?.variance;
                Some(KulikSummary { target_var, variance, relative_error: variance / target_var - 1.0 })
            }
            None => None,
        };
        let peligrad_sang = match (&config.weights, config.path_form) {
            (WeightSource::Linear { spec: spec @ CoefficientSpec::Regvar { .. } }, PathMode::Verify) => {
                let ps = PeligradSang::new(spec, n)?;
                let r: Vec<f64> = rows.iter().map(|p| ps.ratio(p)).collect::<Result<_>>()?;
                Some(gof::summarize(&r)?)
            }
            _ => None,
        };
        let window = match &built {
            Built::Linear(lp) => {
                let w = &lp.window().weights;
                Some(WindowInfo { offset: w.offset, len: w.len(), truncation_tail_bound: w.truncation_tail_bound })
            }
            Built::Row(_) => None,
        };

        results.push(NResult {
            n,
            window,
            normalizer: norm,
            asymptotic_normalizer: asymptotic(config, n)?,
            b_n,
            gof,
            summary: gof::summarize(&defined)?,
            ratio_lln: gof::summarize(&ratios)?,
            kulik,
            peligrad_sang,
            checks: weight_checks(config, built.weights(), d, coeff0)?,
        });
        replicates.push((n, rows));
        statistic.push(stat);
    }

    Ok(ExperimentOutput {
        report: ExperimentReport {
            version: env!("CARGO_PKG_VERSION"),
            statistic: config.normalizer.statistic_name(),
            config: config.clone(),
            innovation_checks: innovation_checks(config)?,
            results,
        },
        replicates,
        statistic,
    })
}
