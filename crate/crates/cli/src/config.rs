//! JSON experiment configs, schema version 1.

use std::path::{Path, PathBuf};

use isoperim_core::kernels::BoundedPerturbation;
use isoperim_core::samplers::{Algorithm, Init};
use isoperim_core::TargetPotential;
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Constants,
    Criteria,
    Track,
    Certify,
    Identities,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Constants => "constants",
            Self::Criteria => "criteria",
            Self::Track => "track",
            Self::Certify => "certify",
            Self::Identities => "identities",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AlgorithmParams {
    Ula { eta: f64 },
    Proximal { eta: f64 },
    Ehmc { c: f64 },
}

impl AlgorithmParams {
    pub fn algorithm(&self) -> Algorithm {
        match *self {
            Self::Ula { eta } => Algorithm::Ula { eta },
            Self::Proximal { eta } => Algorithm::Proximal { eta },
            Self::Ehmc { c } => Algorithm::Ehmc { c },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetParams {
    Quadratic {
        matrix: Vec<Vec<f64>>,
    },
    /// Quadratic plus `(B/2)(1 − cos(ω⟨w, x⟩))`.
    Bounded {
        matrix: Vec<Vec<f64>>,
        oscillation: f64,
        frequency: f64,
        direction: Vec<f64>,
        #[serde(default)]
        lower_bound: Option<f64>,
    },
    /// Quadratic plus `L·√(1 + ‖x‖²)`.
    Lipschitz {
        matrix: Vec<Vec<f64>>,
        lipschitz: f64,
    },
}

pub fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return err("matrix must be a non-empty square array of rows");
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl TargetParams {
    pub fn build(&self) -> Result<TargetPotential, ConfigError> {
        let wrap = |e: isoperim_core::Error| ConfigError(format!("target: {e}"));
        match self {
            Self::Quadratic { matrix: m } => TargetPotential::quadratic(matrix(m)?).map_err(wrap),
            Self::Bounded { matrix: m, oscillation, frequency, direction, lower_bound } => {
                let p = BoundedPerturbation::new(
                    *oscillation,
                    *frequency,
                    DVector::from_column_slice(direction),
                    *lower_bound,
                )
                .map_err(wrap)?;
                TargetPotential::plus_bounded(matrix(m)?, p).map_err(wrap)
            }
            Self::Lipschitz { matrix: m, lipschitz } => {
                TargetPotential::plus_lipschitz(matrix(m)?, *lipschitz).map_err(wrap)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitParams {
    Dirac { point: Vec<f64> },
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl InitParams {
    pub fn build(&self) -> Result<Init, ConfigError> {
        Ok(match self {
            Self::Dirac { point } => Init::Dirac(DVector::from_column_slice(point)),
            Self::Gaussian { mean, cov } => {
                let cov = matrix(cov)?;
                if cov.nrows() != mean.len() {
                    return err("init mean and covariance dimensions differ");
                }
                Init::Gaussian { mean: DVector::from_column_slice(mean), cov }
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoScaleParams {
    pub alpha: f64,
    pub beta: f64,
    pub l_bar: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaParams {
    #[serde(default)]
    pub y_grid: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default)]
    pub n_mc: Option<usize>,
    /// Use Monte Carlo even for Gaussian kernels.
    #[serde(default)]
    pub monte_carlo: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub name: String,
    pub mode: Mode,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub algorithm: Option<AlgorithmParams>,
    #[serde(default)]
    pub target: Option<TargetParams>,
    #[serde(default)]
    pub init: Option<InitParams>,
    #[serde(default)]
    pub two_scale: Option<TwoScaleParams>,
    /// Recursion length for `track`.
    #[serde(default)]
    pub k_max: Option<usize>,
    /// `α^(0)`; defaults to `λ_max` of the initial covariance.
    #[serde(default)]
    pub alpha0: Option<f64>,
    #[serde(default)]
    pub n_chains: Option<usize>,
    #[serde(default)]
    pub n_iters: Option<usize>,
    /// Iterations written to `clouds.csv` and checked in `track`.
    #[serde(default)]
    pub record: Option<Vec<usize>>,
    #[serde(default)]
    pub write_clouds: bool,
    #[serde(default)]
    pub criteria: Option<CriteriaParams>,
    /// Random trials per identity suite.
    #[serde(default)]
    pub trials: Option<usize>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != SCHEMA_VERSION {
            return err(format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == "." || self.name == ".." {
            return err("name must be a plain, non-empty directory name");
        }
        let need = |present: bool, field: &str| -> Result<(), ConfigError> {
            if present {
                Ok(())
            } else {
                err(format!("mode {} requires `{field}`", self.mode.name()))
            }
        };
        match self.mode {
            Mode::Constants => need(self.two_scale.is_some() || self.algorithm.is_some(), "two_scale or algorithm")?,
            Mode::Criteria | Mode::Track => {
                need(self.algorithm.is_some(), "algorithm")?;
                need(self.target.is_some(), "target")?;
            }
            Mode::Certify => {
                need(self.algorithm.is_some(), "algorithm")?;
                need(self.target.is_some(), "target")?;
                need(self.n_chains.is_some(), "n_chains")?;
                need(self.n_iters.is_some(), "n_iters")?;
            }
            Mode::Identities => {}
        }
        if self.mode == Mode::Constants && self.algorithm.is_some() {
            need(self.target.is_some(), "target")?;
        }
        Ok(())
    }

    /// Whether this run draws random numbers.
    pub fn is_stochastic(&self) -> bool {
        match self.mode {
            Mode::Constants => false,
            Mode::Track => self.n_chains.is_some(),
            Mode::Criteria => true,
            Mode::Certify | Mode::Identities => true,
        }
    }

    pub fn target(&self) -> Result<TargetPotential, ConfigError> {
        match &self.target {
            Some(t) => t.build(),
            None => err("missing `target`"),
        }
    }

    pub fn algorithm(&self) -> Result<Algorithm, ConfigError> {
        match &self.algorithm {
            Some(a) => Ok(a.algorithm()),
            None => err("missing `algorithm`"),
        }
    }

    pub fn init(&self, dim: usize) -> Result<Init, ConfigError> {
        match &self.init {
            Some(i) => i.build(),
            None => Ok(Init::Dirac(DVector::zeros(dim))),
        }
    }
}
