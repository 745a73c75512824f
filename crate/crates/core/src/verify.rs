//! Oracle-backed verification of a solved model, as run by `cop-lqr verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{OracleSection, Tolerances};
use crate::model::{ExecState, ModelParams};
use crate::oracle::{bellman_rhs_folded, bellman_rhs_raw, grid_dp, minimize_u, Region};
use crate::solver::{last_period_policy, SolvedModel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub max_residual: Option<f64>,
    pub tolerance: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

pub fn verify(params: &ModelParams, solved: &SolvedModel, opts: &OracleSection) -> VerifyReport {
    let tol = &opts.tolerances;
    let mut checks = vec![
        last_period_check(params, solved, tol),
        definiteness_check(solved),
    ];
    checks.extend(bellman_checks(params, solved, opts));
    checks.push(expectation_check(params, solved, opts));
    if let Some(grid) = &opts.grid {
        checks.push(match grid_dp(params, grid) {
            Ok(tables) => {
                let gap = tables.gap_against(solved);
                CheckResult {
                    name: "grid_dp",
                    passed: gap.max_relative <= tol.grid_gap,
                    samples: gap.nodes_compared,
                    max_residual: Some(gap.max_relative),
                    tolerance: Some(tol.grid_gap),
                    note: Some(format!(
                        "worst node n = {}, q = {}, lambda = {}",
                        gap.step, gap.q, gap.lambda
                    )),
                }
            }
            Err(e) => failed("grid_dp", e.to_string()),
        });
    }
    VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

fn failed(name: &'static str, note: String) -> CheckResult {
    CheckResult {
        name,
        passed: false,
        samples: 0,
        max_residual: None,
        tolerance: None,
        note: Some(note),
    }
}

fn last_period_check(params: &ModelParams, solved: &SolvedModel, tol: &Tolerances) -> CheckResult {
    let Some(p) = solved.policies.last() else {
        return failed("last_period_cross_check", "empty solution".into());
    };
    let lp = last_period_policy(params);
    let resid = (p.alpha - lp.alpha)
        .abs()
        .max((p.beta_q - lp.beta_q).abs())
        .max((p.beta_lambda - lp.beta_lambda).abs());
    CheckResult {
        name: "last_period_cross_check",
        passed: resid <= tol.cross_check,
        samples: 1,
        max_residual: Some(resid),
        tolerance: Some(tol.cross_check),
        note: None,
    }
}

fn definiteness_check(solved: &SolvedModel) -> CheckResult {
    let n = solved.n_steps();
    let bad: Vec<usize> = (0..n)
        .filter(|&k| !solved.values[k].is_positive_definite())
        .collect();
    let min_det = solved.values[..n]
        .iter()
        .map(|v| v.det() / (1.0 + v.norm_sq()))
        .fold(f64::INFINITY, f64::min);
    CheckResult {
        name: "positive_definite",
        passed: bad.is_empty(),
        samples: n,
        max_residual: None,
        tolerance: None,
        note: Some(if bad.is_empty() {
            format!("min det/(1+|P|^2) = {min_det:e}")
        } else {
            format!("not positive definite at n = {bad:?}")
        }),
    }
}

fn sample_state<R: Rng>(rng: &mut R, region: &Region) -> ExecState {
    let q = if region.q_min < region.q_max {
        rng.random_range(region.q_min..region.q_max)
    } else {
        region.q_min
    };
    let l = if region.lambda_min < region.lambda_max {
        rng.random_range(region.lambda_min..region.lambda_max)
    } else {
        region.lambda_min
    };
    ExecState::new(q, l)
}

fn bellman_checks(
    params: &ModelParams,
    solved: &SolvedModel,
    opts: &OracleSection,
) -> [CheckResult; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut argmin_resid: f64 = 0.0;
    let mut fixed_resid: f64 = 0.0;
    let mut error = None;
    for _ in 0..opts.samples {
        let n = rng.random_range(0..solved.n_steps());
        let x = sample_state(&mut rng, &opts.states);
        match minimize_u(x, &solved.values[n + 1], params, n, None) {
            Ok(m) => {
                let v = solved.values[n].value_at(x);
                argmin_resid = argmin_resid.max((m.u - solved.policies[n].action(x)).abs());
                fixed_resid = fixed_resid.max((m.value - v).abs() / (1.0 + v.abs()));
            }
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let tol = &opts.tolerances;
    [
        CheckResult {
            name: "argmin_agreement",
            passed: error.is_none() && argmin_resid <= tol.argmin,
            samples: opts.samples,
            max_residual: Some(argmin_resid),
            tolerance: Some(tol.argmin),
            note: error.clone(),
        },
        CheckResult {
            name: "bellman_fixed_point",
            passed: error.is_none() && fixed_resid <= tol.fixed_point,
            samples: opts.samples,
            max_residual: Some(fixed_resid),
            tolerance: Some(tol.fixed_point),
            note: error,
        },
    ]
}

fn expectation_check(
    params: &ModelParams,
    solved: &SolvedModel,
    opts: &OracleSection,
) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let eta = params.eta();
    let mut resid: f64 = 0.0;
    for _ in 0..opts.samples {
        let n = rng.random_range(0..solved.n_steps());
        let x = sample_state(&mut rng, &opts.states);
        let hi = if eta > 0.0 {
            5.0f64.min(x.lambda / eta)
        } else {
            5.0
        };
        let u = rng.random_range(-5.0..=hi);
        let next = &solved.values[n + 1];
        let raw = bellman_rhs_raw(x, u, next, params, n);
        let folded = bellman_rhs_folded(x, u, next, params, n);
        match (raw, folded) {
            (Ok(r), Ok(f)) => resid = resid.max((r - f).abs() / (1.0 + f.abs())),
            (Err(e), _) | (_, Err(e)) => return failed("expectation_forms", e.to_string()),
        }
    }
    CheckResult {
        name: "expectation_forms",
        passed: resid <= opts.tolerances.expectation,
        samples: opts.samples,
        max_residual: Some(resid),
        tolerance: Some(opts.tolerances.expectation),
        note: None,
    }
}
