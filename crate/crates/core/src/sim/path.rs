use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExecState, ModelParams};
use crate::oracle::stage_cost;
use crate::sim::rng::{path_rng, sample_poisson};
use crate::solver::SolvedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// Exact model dynamics: signed controls, unbounded positions. Negative rates abort the path.
    Raw,
    /// Practical overlay: snipes clamped to `[0, q]` and post-snipe rates floored at zero.
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n_paths: usize,
    pub mode: SimMode,
    pub initial_state: ExecState,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::invalid(
                "simulation.n_paths",
                "need at least one path",
            ));
        }
        if !self.initial_state.is_finite() {
            return Err(Error::invalid(
                "simulation.initial_state",
                "state must be finite",
            ));
        }
        if self.mode == SimMode::Overlay
            && (self.initial_state.q < 0.0 || self.initial_state.lambda < 0.0)
        {
            return Err(Error::invalid(
                "simulation.initial_state",
                "overlay mode needs a nonnegative position and rate",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub q: f64,
    pub lambda: f64,
    pub u: f64,
    pub w: u64,
    pub stage_cost: f64,
    pub dt: f64,
}

/// One simulated execution of the policy over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub path: u64,
    pub steps: Vec<StepRecord>,
    pub terminal: ExecState,
    /// `gamma_N q_N^2`.
    pub terminal_cost: f64,
    /// Steps where an overlay clamp changed the control or the rate.
    pub clamps: usize,
}

impl PathRecord {
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.stage_cost).sum::<f64>() + self.terminal_cost
    }

    pub fn sniped(&self) -> f64 {
        self.steps.iter().map(|s| s.u).sum()
    }

    pub fn passive_fills(&self) -> u64 {
        self.steps.iter().map(|s| s.w).sum()
    }
}

/// `(q - u - w, lambda - eta u)`.
pub fn step_state(x: ExecState, u: f64, w: u64, eta: f64) -> ExecState {
    ExecState::new(x.q - u - w as f64, x.lambda - eta * u)
}

/// Simulates path `path` on its own random stream.
pub fn run_path(
    solved: &SolvedModel,
    params: &ModelParams,
    config: &SimConfig,
    path: u64,
) -> Result<PathRecord> {
    let mut rng = path_rng(config.seed, path);
    run_path_with(&mut rng, solved, params, config, path)
}

pub(crate) fn run_path_with<R: Rng + ?Sized>(
    rng: &mut R,
    solved: &SolvedModel,
    params: &ModelParams,
    config: &SimConfig,
    path: u64,
) -> Result<PathRecord> {
    let n_steps = params.n_steps();
    if solved.n_steps() != n_steps {
        return Err(Error::invalid(
            "solved",
            format!(
                "policy covers {} steps, model has {n_steps}",
                solved.n_steps()
            ),
        ));
    }
    let eta = params.eta();
    let mut x = config.initial_state;
    let mut steps = Vec::with_capacity(n_steps);
    let mut clamps = 0;
    for n in 0..n_steps {
        let dt = params.dt()[n];
        let raw_u = solved.policies[n].action(x);
        let u = match config.mode {
            SimMode::Raw => raw_u,
            SimMode::Overlay => raw_u.clamp(0.0, x.q.max(0.0)),
        };
        let mut clamped = u != raw_u;
        let mut rate = x.lambda - eta * u;
        if rate < 0.0 {
            match config.mode {
                SimMode::Raw => return Err(Error::NegativeRate { rate }),
                SimMode::Overlay => {
                    rate = 0.0;
                    clamped = true;
                }
            }
        }
        let w = sample_poisson(rng, rate * dt)?;
        steps.push(StepRecord {
            n,
            q: x.q,
            lambda: x.lambda,
            u,
            w,
            stage_cost: stage_cost(x, u, w, params.gamma()[n]),
            dt,
        });
        clamps += usize::from(clamped);
        x = step_state(x, u, w, eta);
        if config.mode == SimMode::Overlay {
            x.lambda = rate;
        }
    }
    Ok(PathRecord {
        path,
        steps,
        terminal: x,
        terminal_cost: params.gamma_terminal() * x.q * x.q,
        clamps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GammaSchedule;
    use crate::solver::solve_backward;

    #[test]
    fn step_state_examples() {
        assert_eq!(
            step_state(ExecState::new(5.0, 3.0), 1.0, 2, 0.0),
            ExecState::new(2.0, 3.0)
        );
        assert_eq!(
            step_state(ExecState::new(5.0, 5.0), 2.0, 0, 0.5),
            ExecState::new(3.0, 4.0)
        );
        let x = ExecState::new(-1.5, 2.25);
        assert_eq!(step_state(x, 0.0, 0, 0.7), x);
    }

    fn params(eta: f64) -> ModelParams {
        ModelParams::uniform(
            4,
            0.25,
            &GammaSchedule::Linear {
                start: 0.1,
                end: 0.4,
            },
            50.0,
            eta,
        )
        .unwrap()
    }

    fn config(mode: SimMode, q: f64, lambda: f64) -> SimConfig {
        SimConfig {
            seed: 9,
            n_paths: 1,
            mode,
            initial_state: ExecState::new(q, lambda),
        }
    }

    #[test]
    fn noiseless_path_costs_the_model_value() {
        let p = params(0.0);
        let solved = solve_backward(&p).unwrap();
        let cfg = config(SimMode::Raw, 5.0, 0.0);
        let rec = run_path(&solved, &p, &cfg, 0).unwrap();
        assert!(rec.steps.iter().all(|s| s.w == 0));
        let v0 = solved.initial_value(cfg.initial_state);
        assert!((rec.total_cost() - v0).abs() < 1e-9 * (1.0 + v0.abs()));
    }

    #[test]
    fn conservation_and_rate_bookkeeping() {
        let p = params(0.3);
        let solved = solve_backward(&p).unwrap();
        let cfg = config(SimMode::Raw, 6.0, 4.0);
        for path in 0..200 {
            let rec = run_path(&solved, &p, &cfg, path).unwrap();
            let recomposed = rec.terminal.q + rec.sniped() + rec.passive_fills() as f64;
            assert!((recomposed - 6.0).abs() < 1e-12);
            assert!((rec.terminal.lambda - (4.0 - 0.3 * rec.sniped())).abs() < 1e-12);
            let staged: f64 = rec.steps.iter().map(|s| s.stage_cost).sum();
            assert_eq!(rec.total_cost(), staged + rec.terminal_cost);
        }
    }

    #[test]
    fn equal_seeds_give_identical_paths() {
        let p = params(0.3);
        let solved = solve_backward(&p).unwrap();
        let cfg = config(SimMode::Raw, 6.0, 4.0);
        assert_eq!(
            run_path(&solved, &p, &cfg, 17).unwrap(),
            run_path(&solved, &p, &cfg, 17).unwrap()
        );
    }

    #[test]
    fn stiff_single_step_snipes_expected_remainder() {
        let dt = 0.2;
        let p = ModelParams::uniform(1, dt, &GammaSchedule::Constant(0.1), 1e7, 1e-9).unwrap();
        let solved = solve_backward(&p).unwrap();
        let cfg = config(SimMode::Raw, 5.0, 3.0);
        let mut shortfall = 0.0;
        let n = 20_000;
        for path in 0..n {
            let rec = run_path(&solved, &p, &cfg, path).unwrap();
            assert!((rec.steps[0].u - (5.0 - 3.0 * dt)).abs() < 1e-5);
            shortfall += rec.terminal.q;
        }
        assert!((shortfall / n as f64).abs() < 0.03);
    }

    #[test]
    fn raw_mode_aborts_on_negative_rate() {
        let p = params(0.9);
        let solved = solve_backward(&p).unwrap();
        let err = run_path(&solved, &p, &config(SimMode::Raw, 20.0, 0.5), 0).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
        let rec = run_path(&solved, &p, &config(SimMode::Overlay, 20.0, 0.5), 0).unwrap();
        assert!(rec.clamps > 0);
        for s in &rec.steps {
            assert!(s.u >= 0.0 && s.u <= s.q.max(0.0));
            assert!(s.lambda >= 0.0);
        }
    }
}
