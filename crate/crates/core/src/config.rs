//! Run configuration: a versioned JSON document with `model`, `simulation`, `oracle`
//! and `output` blocks. Unknown keys are rejected everywhere.
//!
//! ```json
//! {
//!   "version": 1,
//!   "model": {
//!     "n_steps": 6,
//!     "dt": 0.1,
//!     "gamma": { "linear": { "start": 0.1, "end": 0.6 } },
//!     "gamma_terminal": 100.0,
//!     "eta": 0.5
//!   },
//!   "simulation": { "seed": 42, "n_paths": 100000, "mode": "raw",
//!                   "initial_state": { "q": 5.0, "lambda": 5.0 } }
//! }
//! ```
//!
//! `dt` is a single duration (equal partition) or a list of `n_steps` durations, in minutes.
//! `gamma` is `{"constant": g}`, `{"linear": {"start": a, "end": b}}` or `{"list": [...]}`.
//! Omitted blocks take the defaults of their `Default` impls below.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{ExecState, GammaSchedule, ModelParams};
use crate::oracle::{GridSpec, Region};
use crate::sim::{SimConfig, SimMode};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub model: ModelSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Uniform(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_steps: usize,
    pub dt: DtSpec,
    pub gamma: GammaSchedule,
    pub gamma_terminal: f64,
    pub eta: f64,
}

impl ModelSection {
    pub fn to_params(&self) -> Result<ModelParams, Error> {
        let dt = match &self.dt {
            DtSpec::Uniform(d) => vec![*d; self.n_steps],
            DtSpec::List(v) => {
                if v.len() != self.n_steps {
                    return Err(Error::invalid(
                        "dt",
                        format!("list has {} entries, n_steps is {}", v.len(), self.n_steps),
                    ));
                }
                v.clone()
            }
        };
        ModelParams::new(
            dt,
            self.gamma.materialize(self.n_steps)?,
            self.gamma_terminal,
            self.eta,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub seed: u64,
    pub n_paths: usize,
    pub mode: SimMode,
    pub initial_state: ExecState,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            seed: 42,
            n_paths: 100_000,
            mode: SimMode::Raw,
            initial_state: ExecState::new(5.0, 5.0),
        }
    }
}

impl SimulationSection {
    pub fn to_sim_config(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            n_paths: self.n_paths,
            mode: self.mode,
            initial_state: self.initial_state,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Absolute gap between numeric argmin and affine policy.
    pub argmin: f64,
    /// Relative gap `|min f - V_n(x)| / (1 + |V_n(x)|)`.
    pub fixed_point: f64,
    /// Relative gap between summed and folded expectations.
    pub expectation: f64,
    /// Absolute gap between the last solved policy and its direct formula.
    pub cross_check: f64,
    /// Relative grid-DP gap on the check region.
    pub grid_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            argmin: 1e-6,
            fixed_point: 1e-6,
            expectation: 1e-10,
            cross_check: 1e-12,
            grid_gap: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSection {
    pub seed: u64,
    /// Random `(step, state)` samples per check.
    pub samples: usize,
    /// Box the random states are drawn from.
    pub states: Region,
    pub tolerances: Tolerances,
    /// Grid dynamic program; skipped when absent.
    pub grid: Option<GridSpec>,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            seed: 7,
            samples: 10_000,
            states: Region {
                q_min: -10.0,
                q_max: 10.0,
                lambda_min: 0.0,
                lambda_max: 10.0,
            },
            tolerances: Tolerances::default(),
            grid: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Config rejection with the line of the offending key when it can be located.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            line: (e.line() > 0).then_some(e.line()),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|e| {
            let key = match &e {
                Error::InvalidParameter { field, .. } => field.clone(),
                _ => String::new(),
            };
            ConfigError {
                line: locate_key(text, &key),
                message: e.to_string(),
            }
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(
                "version",
                format!(
                    "unsupported config version {}, expected {CONFIG_VERSION}",
                    self.version
                ),
            ));
        }
        self.model.to_params()?;
        self.simulation.to_sim_config().validate()?;
        if let Some(grid) = &self.oracle.grid {
            grid.validate()?;
        }
        let s = &self.oracle.states;
        if !(s.q_min <= s.q_max && 0.0 <= s.lambda_min && s.lambda_min <= s.lambda_max) {
            return Err(Error::invalid(
                "states",
                "state box must be nonempty with nonnegative rates",
            ));
        }
        if self.oracle.samples == 0 {
            return Err(Error::invalid("samples", "need at least one sample"));
        }
        if self.output.formats.is_empty() {
            return Err(Error::invalid("formats", "need at least one output format"));
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        self.model.to_params().expect("validated at parse time")
    }
}

/// Line of the first occurrence of the key named by the last component of a field path
/// such as `simulation.n_paths` or `dt[3]`.
fn locate_key(text: &str, field: &str) -> Option<usize> {
    let leaf = field.rsplit('.').next()?.split('[').next()?;
    if leaf.is_empty() {
        return None;
    }
    let needle = format!("\"{leaf}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}
