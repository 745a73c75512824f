use crate::error::{Error, Result};
use crate::model::{ExecState, ModelParams};
use crate::oracle::poisson::PoissonSpec;
use crate::quadratic::QuadraticValue;

/// Realized stage cost `gamma q^2 + u^2 - w` in half-spreads.
pub fn stage_cost(x: ExecState, u: f64, w: u64, gamma: f64) -> f64 {
    gamma * x.q * x.q + u * u - w as f64
}

/// Rate after sniping `u` lots. Fails when the impact drives it below zero.
fn post_snipe_rate(x: ExecState, u: f64, eta: f64) -> Result<f64> {
    let rate = x.lambda - eta * u;
    if rate < 0.0 {
        return Err(Error::NegativeRate { rate });
    }
    Ok(rate)
}

/// Right-hand side of the Bellman equation by direct summation over the truncated
/// Poisson law of the passive fill count: `E_W[ j(u, W | x) + V_{n+1}(x_{n+1}) ]`.
pub fn bellman_rhs_raw(
    x: ExecState,
    u: f64,
    v_next: &QuadraticValue,
    params: &ModelParams,
    n: usize,
) -> Result<f64> {
    let dt = params.dt_at(n)?;
    let gamma = params.gamma()[n];
    let rate = post_snipe_rate(x, u, params.eta())?;
    let law = PoissonSpec::new(rate * dt)?;
    let next_lambda = rate;
    let mut acc = 0.0;
    for (k, w) in law.table().into_iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let k = k as u64;
        let next = ExecState::new(x.q - u - k as f64, next_lambda);
        acc += w * (stage_cost(x, u, k, gamma) + v_next.value_at(next));
    }
    Ok(acc)
}

/// Same expectation with the Poisson moments folded in analytically:
/// `gamma q^2 + u^2 - (1 - p11) lambda+ dt + V_{n+1}(J x - h u)`.
///
/// Defined for any `u`, including those that make `lambda+` negative.
pub fn bellman_rhs_folded(
    x: ExecState,
    u: f64,
    v_next: &QuadraticValue,
    params: &ModelParams,
    n: usize,
) -> Result<f64> {
    let (j, h) = params.step_matrices(n)?;
    let dt = params.dt()[n];
    let gamma = params.gamma()[n];
    let rate = x.lambda - params.eta() * u;
    let mean_next = ExecState::new(
        j[0][0] * x.q + j[0][1] * x.lambda - h[0] * u,
        j[1][0] * x.q + j[1][1] * x.lambda - h[1] * u,
    );
    Ok(gamma * x.q * x.q + u * u - (1.0 - v_next.p11) * rate * dt + v_next.value_at(mean_next))
}
