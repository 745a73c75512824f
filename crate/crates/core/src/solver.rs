//! Closed-form backward recursion for the stochastic LQR placement model.
//!
//! With `V_{n+1}(x) = x'P x + b'x + c`, the expected cost of sniping `u` at `t_n` is
//!
//! ```text
//! f(u | x) = gamma_n q^2 + u^2 - (1 - p11) lambda+ dt + V_{n+1}(J x - h u),   lambda+ = lambda - eta u
//! ```
//!
//! which is a convex quadratic in `u` with curvature `A = 1 + h'P h >= 1`. Its minimizer is
//! affine in the state and substituting it back keeps `V_n` quadratic.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ExecState, ModelParams};
use crate::quadratic::{AffinePolicy, QuadraticValue};

/// Value functions for `t_0 ..= t_N` and optimal policies for `t_0 .. t_{N-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvedModel {
    pub values: Vec<QuadraticValue>,
    pub policies: Vec<AffinePolicy>,
}

impl SolvedModel {
    pub fn n_steps(&self) -> usize {
        self.policies.len()
    }

    pub fn value(&self, n: usize) -> Result<&QuadraticValue> {
        self.values.get(n).ok_or(Error::StepOutOfRange {
            index: n,
            n_steps: self.n_steps(),
        })
    }

    pub fn policy(&self, n: usize) -> Result<&AffinePolicy> {
        self.policies.get(n).ok_or(Error::StepOutOfRange {
            index: n,
            n_steps: self.n_steps(),
        })
    }

    /// Expected total cost from `x` at `t_0` under the optimal policy.
    pub fn initial_value(&self, x: ExecState) -> f64 {
        self.values[0].value_at(x)
    }

    /// Optimal snipe size at `t_0`.
    pub fn initial_action(&self, x: ExecState) -> f64 {
        self.policies[0].action(x)
    }
}

/// `V_N(x) = gamma_N q^2`. Only positive semi-definite.
pub fn terminal_value(params: &ModelParams) -> QuadraticValue {
    QuadraticValue {
        p11: params.gamma_terminal(),
        p12: 0.0,
        p22: 0.0,
        b1: 0.0,
        b2: 0.0,
        c: 0.0,
    }
}

/// Optimal last-period policy written directly in terms of `gamma_N`, `eta` and
/// `dt_{N-1}`: `u = alpha + beta (q - lambda dt)`.
pub fn last_period_policy(params: &ModelParams) -> AffinePolicy {
    let dt = params.dt()[params.n_steps() - 1];
    let g = params.gamma_terminal();
    let ed = params.eta() * dt;
    let denom = 1.0 + g * (1.0 - ed) * (1.0 - ed);
    let alpha = (g - 1.0) * ed / (2.0 * denom);
    let beta = g * (1.0 - ed) / denom;
    AffinePolicy {
        alpha,
        beta_q: beta,
        beta_lambda: -beta * dt,
    }
}

/// One Bellman step: given `V_{n+1}`, returns the optimal policy at `t_n` and `V_n`.
///
/// The successor may be semi-definite (the terminal value); the output must be
/// positive definite.
pub fn backstep(
    params: &ModelParams,
    n: usize,
    next: &QuadraticValue,
) -> Result<(AffinePolicy, QuadraticValue)> {
    let (policy, value) = backstep_unchecked(params, n, next)?;
    if !value.is_positive_definite() {
        return Err(Error::NotPositiveDefinite {
            step: n,
            p11: value.p11,
            det: value.det(),
        });
    }
    Ok((policy, value))
}

fn backstep_unchecked(
    params: &ModelParams,
    n: usize,
    next: &QuadraticValue,
) -> Result<(AffinePolicy, QuadraticValue)> {
    let (_, h) = params.step_matrices(n)?;
    let dt = params.dt()[n];
    let gamma = params.gamma()[n];
    let eta = params.eta();
    let (a, b, d) = (next.p11, next.p12, next.p22);

    let ph = [a * h[0] + b * h[1], b * h[0] + d * h[1]];
    let curv = 1.0 + h[0] * ph[0] + h[1] * ph[1];
    if !curv.is_finite() {
        return Err(Error::NonFinite {
            step: n,
            quantity: "curvature",
        });
    }
    let l11 = 1.0 - a;

    let alpha = (h[0] * next.b1 + h[1] * next.b2 - l11 * eta * dt) / (2.0 * curv);
    // J' P h with J = [[1, -dt], [0, 1]]
    let beta_q = ph[0] / curv;
    let beta_lambda = (ph[1] - dt * ph[0]) / curv;
    let policy = AffinePolicy {
        alpha,
        beta_q,
        beta_lambda,
    };
    if !policy.is_finite() {
        return Err(Error::NonFinite {
            step: n,
            quantity: "policy",
        });
    }

    // Q = P - (P h)(P h)' / A, then P_n = gamma e1 e1' + J' Q J
    let q11 = a - ph[0] * ph[0] / curv;
    let q12 = b - ph[0] * ph[1] / curv;
    let q21 = b - ph[1] * ph[0] / curv;
    let q22 = d - ph[1] * ph[1] / curv;
    let m11 = q11;
    let m12 = q12 - dt * q11;
    let m21 = q21 - dt * q11;
    let m22 = dt * dt * q11 - dt * (q12 + q21) + q22;

    let value = QuadraticValue {
        p11: gamma + m11,
        p12: 0.5 * (m12 + m21),
        p22: m22,
        b1: next.b1 - 2.0 * curv * alpha * beta_q,
        b2: next.b2 - dt * next.b1 - l11 * dt - 2.0 * curv * alpha * beta_lambda,
        c: next.c - curv * alpha * alpha,
    };
    if !value.is_finite() {
        return Err(Error::NonFinite {
            step: n,
            quantity: "value",
        });
    }
    Ok((policy, value))
}

/// Backward induction from the terminal value over `n = N-1, ..., 0`.
pub fn solve_backward(params: &ModelParams) -> Result<SolvedModel> {
    let n_steps = params.n_steps();
    let mut values = vec![terminal_value(params); n_steps + 1];
    let mut policies = Vec::with_capacity(n_steps);
    for n in (0..n_steps).rev() {
        let (policy, value) = backstep(params, n, &values[n + 1])?;
        values[n] = value;
        policies.push(policy);
    }
    policies.reverse();
    Ok(SolvedModel { values, policies })
}
