//! Least-squares recovery of the baseline hit rate and the impact coefficient from
//! execution logs.
//!
//! Within a path the post-snipe rate at step `n` is `lambda_0 - eta s_n`, where `s_n` is
//! the cumulative size sniped up to and including `t_n`. Observed fill rates `W_n / dt_n`
//! are regressed on `s_n` by ordinary least squares; only sniped sizes, fill counts and
//! bin lengths are used, never the logged rates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::path::PathRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpactEstimate {
    pub lambda0: f64,
    pub lambda0_se: f64,
    pub eta: f64,
    pub eta_se: f64,
    pub n_obs: usize,
}

pub fn calibrate_impact(logs: &[PathRecord]) -> Result<ImpactEstimate> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for rec in logs {
        let mut sniped = 0.0;
        for s in &rec.steps {
            sniped += s.u;
            xs.push(sniped);
            ys.push(s.w as f64 / s.dt);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::InsufficientExcitation(format!("{n} observations")));
    }
    let nf = n as f64;
    let x_bar = xs.iter().sum::<f64>() / nf;
    let y_bar = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let scale: f64 = xs.iter().map(|x| x * x).sum::<f64>();
    if !(sxx > 1e-12 * (1.0 + scale)) {
        return Err(Error::InsufficientExcitation(
            "cumulative snipe sizes do not vary; impact is unidentifiable".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let sigma2 = rss / (nf - 2.0);
    Ok(ImpactEstimate {
        lambda0: intercept,
        lambda0_se: (sigma2 * (1.0 / nf + x_bar * x_bar / sxx)).sqrt(),
        eta: -slope,
        eta_se: (sigma2 / sxx).sqrt(),
        n_obs: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ExecState, GammaSchedule, ModelParams};
    use crate::sim::path::{SimConfig, SimMode, StepRecord};
    use crate::sim::report::simulate;
    use crate::solver::solve_backward;

    fn logs(eta: f64, n_paths: usize) -> Vec<PathRecord> {
        let p = ModelParams::uniform(
            6,
            0.1,
            &GammaSchedule::Linear {
                start: 0.1,
                end: 0.6,
            },
            100.0,
            eta,
        )
        .unwrap();
        let s = solve_backward(&p).unwrap();
        let cfg = SimConfig {
            seed: 5,
            n_paths,
            mode: SimMode::Raw,
            initial_state: ExecState::new(5.0, 5.0),
        };
        simulate(&s, &p, &cfg).unwrap().records
    }

    #[test]
    fn recovers_generating_impact() {
        let est = calibrate_impact(&logs(0.5, 20_000)).unwrap();
        assert!((est.eta - 0.5).abs() <= 3.0 * est.eta_se, "{est:?}");
        assert!((est.lambda0 - 5.0).abs() <= 3.0 * est.lambda0_se, "{est:?}");
    }

    #[test]
    fn recovers_null_impact() {
        let est = calibrate_impact(&logs(0.0, 20_000)).unwrap();
        assert!(est.eta.abs() <= 3.0 * est.eta_se, "{est:?}");
    }

    #[test]
    fn no_snipes_is_unidentifiable() {
        let rec = PathRecord {
            path: 0,
            steps: (0..5)
                .map(|n| StepRecord {
                    n,
                    q: 3.0,
                    lambda: 2.0,
                    u: 0.0,
                    w: n as u64 % 2,
                    stage_cost: 0.0,
                    dt: 0.1,
                })
                .collect(),
            terminal: ExecState::new(1.0, 2.0),
            terminal_cost: 0.0,
            clamps: 0,
        };
        let err = calibrate_impact(&[rec.clone(), rec]).unwrap_err();
        assert!(matches!(err, Error::InsufficientExcitation(_)));
    }
}
