use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::innovations::Flavor;
use crate::simulate::PathMode;
use crate::tail::TailModel;
use crate::weights::{CoefficientSpec, WeightArray, DEFAULT_EPS_TAIL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: TailModel,
    /// None of the shipped models take parameters; kept for schema stability.
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub params: serde_json::Map<String, serde_json::Value>,
}

/// How the `n`-th triangular row `c_n1, …, c_nn` is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RowSpec {
    /// `c_nk = 1`
    Equal,
    /// A fixed row; every `n` must equal its length.
    Explicit { values: Vec<f64> },
    /// Least-squares slope weights `c_nk = k − (n+1)/2`.
    Regression,
}

impl RowSpec {
    pub fn build(&self, n: usize) -> Result<WeightArray> {
        let entries = match self {
            RowSpec::Equal => vec![1.0; n],
            RowSpec::Explicit { values } => {
                if values.len() != n {
                    return Err(Error::Config(format!(
                        "explicit row has {} entries but n = {n}",
                        values.len()
                    )));
                }
                values.clone()
            }
            RowSpec::Regression => {
                let mid = (n as f64 + 1.0) / 2.0;
                (1..=n).map(|k| k as f64 - mid).collect()
            }
        };
        Ok(WeightArray::row(entries))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSource {
    Triangular { row: RowSpec },
    Linear { spec: CoefficientSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalizerChoice {
    #[serde(rename = "Dn")]
    Dn,
    #[serde(rename = "self")]
    SelfNormalized,
    #[serde(rename = "Bn")]
    Bn,
}

impl NormalizerChoice {
    /// Column name of the statistic scored against Φ.
    pub fn statistic_name(self) -> &'static str {
        match self {
            NormalizerChoice::Dn => "T_D",
            NormalizerChoice::SelfNormalized => "T_self",
            NormalizerChoice::Bn => "T_B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Check {
    #[serde(rename = "gen")]
    Gen,
    #[serde(rename = "coeffD")]
    CoeffD,
    #[serde(rename = "coeff0")]
    Coeff0,
    M1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

fn default_eps_tail() -> f64 {
    DEFAULT_EPS_TAIL
}

fn default_checks() -> Vec<Check> {
    vec![Check::Gen, Check::CoeffD, Check::Coeff0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub weights: WeightSource,
    pub n: Vec<usize>,
    pub innovations: Flavor,
    pub replications: usize,
    pub seed: u64,
    pub normalizer: NormalizerChoice,
    pub output: OutputConfig,
    #[serde(default = "default_eps_tail")]
    pub eps_tail: f64,
    /// `coeff0` is skipped for triangular arrays, where it does not apply.
    #[serde(default = "default_checks")]
    pub checks: Vec<Check>,
    #[serde(default)]
    pub path_form: PathMode,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.model.params.is_empty() {
            return Err(Error::Config(format!("model '{}' takes no parameters", self.model.name)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.n.is_empty() {
            return Err(Error::Config("n list is empty".into()));
        }
        if self.n.contains(&0) {
            return Err(Error::Config("every n must be >= 1".into()));
        }
        if self.replications >= 1 << 40 || self.n.len() >= 1 << 23 {
            return Err(Error::Config("too many replications or n values for the stream-id layout".into()));
        }
        if !(self.eps_tail > 0.0 && self.eps_tail < 1.0) {
            return Err(Error::Config(format!("eps_tail must lie in (0, 1), got {}", self.eps_tail)));
        }
        self.innovations.validate()?;
        match &self.weights {
            WeightSource::Triangular { row } => {
                for &n in &self.n {
                    row.build(n)?;
                }
            }
            WeightSource::Linear { spec } => {
                spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.weights, WeightSource::Linear { .. })
    }
}

/// Stream id of replicate `rep` at position `n_index` of the n list.
pub fn stream_id(n_index: usize, rep: usize) -> u64 {
    ((n_index as u64) << 40) | rep as u64
}

/// Stream id reserved for the innovation diagnostics; disjoint from every replicate.
pub fn diagnostic_stream_id() -> u64 {
    1u64 << 63
}
