//! Model parameters, the execution state and the per-step transition matrices.
//!
//! Units: every cost is measured in half-spreads (the half-spread is folded into the
//! delay penalties), time in minutes, rates in lots per minute, positions in lots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2x2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// State of the child order right before an action time: outstanding lots and the
/// Poisson rate at which resting passive lots are hit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecState {
    pub q: f64,
    pub lambda: f64,
}

impl ExecState {
    pub const fn new(q: f64, lambda: f64) -> Self {
        Self { q, lambda }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.lambda.is_finite()
    }
}

/// Delay-penalty schedule over the action times `t_0 .. t_{N-1}`.
///
/// Penalties are expected to already include the security's real-time variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GammaSchedule {
    Constant(f64),
    /// Linear ramp from `start` at `t_0` to `end` at `t_{N-1}`.
    Linear {
        start: f64,
        end: f64,
    },
    List(Vec<f64>),
}

impl GammaSchedule {
    pub fn materialize(&self, n_steps: usize) -> Result<Vec<f64>> {
        match self {
            GammaSchedule::Constant(g) => Ok(vec![*g; n_steps]),
            GammaSchedule::Linear { start, end } => Ok((0..n_steps)
                .map(|n| {
                    if n_steps == 1 {
                        *start
                    } else {
                        start + (end - start) * n as f64 / (n_steps - 1) as f64
                    }
                })
                .collect()),
            GammaSchedule::List(v) => {
                if v.len() != n_steps {
                    return Err(Error::invalid(
                        "gamma",
                        format!("list has {} entries, expected {n_steps}", v.len()),
                    ));
                }
                Ok(v.clone())
            }
        }
    }
}

/// Validated parameters of the placement model. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    dt: Vec<f64>,
    gamma: Vec<f64>,
    gamma_terminal: f64,
    eta: f64,
}

impl ModelParams {
    /// Builds and validates a parameter set. `dt[n]` is the duration of `[t_n, t_{n+1})`
    /// and `gamma[n]` the delay penalty applied at `t_n`.
    pub fn new(dt: Vec<f64>, gamma: Vec<f64>, gamma_terminal: f64, eta: f64) -> Result<Self> {
        if dt.is_empty() {
            return Err(Error::invalid(
                "n_steps",
                "horizon must have at least one step",
            ));
        }
        if gamma.len() != dt.len() {
            return Err(Error::invalid(
                "gamma",
                format!("{} penalties for {} steps", gamma.len(), dt.len()),
            ));
        }
        for (n, &d) in dt.iter().enumerate() {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(
                    format!("dt[{n}]"),
                    format!("duration must be positive, got {d}"),
                ));
            }
        }
        for (n, &g) in gamma.iter().enumerate() {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::invalid(
                    format!("gamma[{n}]"),
                    format!("penalty must be nonnegative, got {g}"),
                ));
            }
        }
        if !(gamma_terminal.is_finite() && gamma_terminal > 0.0) {
            return Err(Error::invalid(
                "gamma_terminal",
                format!("terminal penalty must be positive, got {gamma_terminal}"),
            ));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::invalid(
                "eta",
                format!("impact must be nonnegative, got {eta}"),
            ));
        }
        for (n, &d) in dt.iter().enumerate() {
            if eta * d >= 1.0 {
                return Err(Error::invalid(
                    format!("dt[{n}]"),
                    format!(
                        "validity constraint eta*dt < 1 violated: eta*dt = {}",
                        eta * d
                    ),
                ));
            }
        }
        Ok(Self {
            dt,
            gamma,
            gamma_terminal,
            eta,
        })
    }

    /// Equal partition of the horizon with a given penalty schedule.
    pub fn uniform(
        n_steps: usize,
        dt: f64,
        gamma: &GammaSchedule,
        gamma_terminal: f64,
        eta: f64,
    ) -> Result<Self> {
        Self::new(
            vec![dt; n_steps],
            gamma.materialize(n_steps)?,
            gamma_terminal,
            eta,
        )
    }

    pub fn n_steps(&self) -> usize {
        self.dt.len()
    }

    pub fn dt(&self) -> &[f64] {
        &self.dt
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_terminal(&self) -> f64 {
        self.gamma_terminal
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dt_at(&self, n: usize) -> Result<f64> {
        self.check_step(n)?;
        Ok(self.dt[n])
    }

    pub fn gamma_at(&self, n: usize) -> Result<f64> {
        self.check_step(n)?;
        Ok(self.gamma[n])
    }

    pub(crate) fn check_step(&self, n: usize) -> Result<()> {
        if n >= self.n_steps() {
            return Err(Error::StepOutOfRange {
                index: n,
                n_steps: self.n_steps(),
            });
        }
        Ok(())
    }

    /// Same model with a different impact coefficient.
    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(
            self.dt.clone(),
            self.gamma.clone(),
            self.gamma_terminal,
            eta,
        )
    }

    /// Same model with a different terminal penalty.
    pub fn with_gamma_terminal(&self, gamma_terminal: f64) -> Result<Self> {
        Self::new(
            self.dt.clone(),
            self.gamma.clone(),
            gamma_terminal,
            self.eta,
        )
    }

    /// Non-fatal advisories. A delay penalty that decreases over the horizon works
    /// against completion but is still a valid model.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let seq = self
            .gamma
            .iter()
            .chain(std::iter::once(&self.gamma_terminal));
        for (n, (a, b)) in seq.clone().zip(seq.skip(1)).enumerate() {
            if b < a {
                out.push(format!(
                    "delay penalty decreases between t_{n} and t_{} ({a} -> {b})",
                    n + 1
                ));
            }
        }
        out
    }

    /// `(J_n, h_n)` for step `n`.
    pub fn step_matrices(&self, n: usize) -> Result<(Mat2, [f64; 2])> {
        self.check_step(n)?;
        Ok(step_matrices_for(self.dt[n], self.eta))
    }
}

/// Transition pieces for a bin of length `dt`: the expected next state under control
/// `u` is `J x - h u`, with `J = [[1, -dt], [0, 1]]` and `h = (1 - eta*dt, eta)`.
pub fn step_matrices_for(dt: f64, eta: f64) -> (Mat2, [f64; 2]) {
    ([[1.0, -dt], [0.0, 1.0]], [1.0 - eta * dt, eta])
}
