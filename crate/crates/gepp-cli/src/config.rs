//! Run configuration: JSON schema, defaults, and CLI-flag overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gepp_core::{Belief, InitialStateSampling, ModelParams, RawModelParams, SimConfig};

use crate::CliError;

pub const DEFAULT_GRID_N: usize = 512;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SQUARE_M: usize = 101;
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Which model parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Lambda0,
    Lambda1,
    RLow,
    RHigh,
    Beta,
    /// Sets r_high = value · r_low.
    RhOverRl,
}

impl std::fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SweepParameter::Lambda0 => "lambda0",
            SweepParameter::Lambda1 => "lambda1",
            SweepParameter::RLow => "r_low",
            SweepParameter::RHigh => "r_high",
            SweepParameter::Beta => "beta",
            SweepParameter::RhOverRl => "rh_over_rl",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingSpec {
    #[default]
    FromBelief,
    Fixed { ch1_good: bool, ch2_good: bool },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSpec {
    pub episodes: usize,
    /// Explicit horizon; derived from `truncation_error` when absent.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Absolute discounted-tail budget; defaults to 1e-6 of the value scale
    /// 2R_l/(1−β).
    #[serde(default)]
    pub truncation_error: Option<f64>,
    pub initial_belief: (f64, f64),
    /// Policy names: optimal | myopic | always-balanced | always-bet1 |
    /// always-bet2.
    pub policies: Vec<String>,
    #[serde(default)]
    pub initial_state_sampling: SamplingSpec,
    /// Write per-slot CSV traces for this many leading episodes.
    #[serde(default)]
    pub trace_episodes: usize,
}

impl SimSpec {
    pub fn to_core(&self, params: &ModelParams, seed: u64) -> Result<SimConfig, CliError> {
        let initial_belief = Belief::new(self.initial_belief.0, self.initial_belief.1)
            .map_err(|e| CliError::Config(format!("sim.initial_belief: {e}")))?;
        let horizon = match self.horizon {
            Some(h) => h,
            None => {
                let err = self.truncation_error.unwrap_or_else(|| {
                    1e-6 * 2.0 * params.r_low() / (1.0 - params.beta()).max(f64::MIN_POSITIVE)
                });
                SimConfig::horizon_for(params, err)
            }
        };
        Ok(SimConfig {
            horizon,
            episodes: self.episodes,
            seed,
            initial_belief,
            initial_state_sampling: match self.initial_state_sampling {
                SamplingSpec::FromBelief => InitialStateSampling::FromBelief,
                SamplingSpec::Fixed { ch1_good, ch2_good } => {
                    InitialStateSampling::Fixed { ch1_good, ch2_good }
                }
            },
        })
    }
}

/// The on-disk configuration; CLI flags override individual fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: RawModelParams,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Query-grid resolution per axis for full-square exports.
    #[serde(default = "default_square_m")]
    pub square_m: usize,
    #[serde(default = "default_tie_tol")]
    pub tie_tol: f64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sim: Option<SimSpec>,
}

fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_square_m() -> usize {
    DEFAULT_SQUARE_M
}

fn default_tie_tol() -> f64 {
    DEFAULT_TIE_TOL
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    /// Validated model parameters.
    pub fn model_params(&self) -> Result<ModelParams, CliError> {
        ModelParams::try_from(self.params).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model_params()?;
        if self.grid_n < 2 {
            return Err(CliError::Config(format!(
                "grid_n = {} is below the minimum of 2",
                self.grid_n
            )));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(CliError::Config(format!("tol = {} must be > 0", self.tol)));
        }
        if self.square_m < 2 {
            return Err(CliError::Config(format!(
                "square_m = {} is below the minimum of 2",
                self.square_m
            )));
        }
        if let Some(sim) = &self.sim {
            if sim.episodes == 0 {
                return Err(CliError::Config("sim.episodes must be >= 1".into()));
            }
            if sim.policies.is_empty() {
                return Err(CliError::Config("sim.policies must not be empty".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(CliError::Config("sweep.values must not be empty".into()));
            }
        }
        Ok(())
    }

}
