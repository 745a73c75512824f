use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sim::path::{run_path, run_path_with, PathRecord, SimConfig, SimMode};
use crate::sim::rng::{path_rng, PILOT_STREAM_BASE};
use crate::solver::SolvedModel;

/// Largest tolerated fraction of raw-mode paths that hit a negative Poisson rate.
pub const MAX_ABORT_FRACTION: f64 = 1e-6;
/// Paths in the raw-mode pre-flight pilot.
pub const PILOT_PATHS: usize = 10_000;

pub const OVERLAY_LABEL: &str = "model-inconsistent overlay";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mode: SimMode,
    pub n_paths: usize,
    pub mean_cost: f64,
    /// Sample standard deviation over `sqrt(n_paths)`; absent for a single path.
    pub stderr: Option<f64>,
    pub cost_quantiles: Quantiles,
    /// Mean outstanding lots at the end of the horizon.
    pub mean_completion_shortfall: f64,
    /// Sniped lots over all lots traded; absent when nothing traded.
    pub snipe_share: Option<f64>,
    pub clamp_count: usize,
    pub aborted_paths: usize,
    /// Closed-form expected cost from the initial state.
    pub model_value: f64,
    /// `|mean_cost - model_value| / stderr`.
    pub z_score: Option<f64>,
    /// Set in overlay mode, where the mean cost is not expected to match the model value.
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<PathRecord>,
    pub report: SimReport,
}

/// Runs every path and aggregates in path order.
pub fn simulate(
    solved: &SolvedModel,
    params: &ModelParams,
    config: &SimConfig,
) -> Result<Simulation> {
    config.validate()?;
    if config.mode == SimMode::Raw {
        preflight(solved, params, config)?;
    }
    let outcomes: Vec<Result<PathRecord>> = (0..config.n_paths as u64)
        .into_par_iter()
        .map(|path| run_path(solved, params, config, path))
        .collect();
    let mut records = Vec::with_capacity(outcomes.len());
    let mut aborted = 0;
    for outcome in outcomes {
        match outcome {
            Ok(rec) => records.push(rec),
            Err(Error::NegativeRate { .. }) => aborted += 1,
            Err(e) => return Err(e),
        }
    }
    if aborted as f64 > MAX_ABORT_FRACTION * config.n_paths as f64 {
        return Err(Error::AbortFraction {
            aborted,
            total: config.n_paths,
        });
    }
    let report = summarize(&records, solved, config, aborted);
    Ok(Simulation { records, report })
}

/// Monte Carlo estimate of the expected cost of following `solved` from the initial state.
pub fn monte_carlo(
    solved: &SolvedModel,
    params: &ModelParams,
    config: &SimConfig,
) -> Result<SimReport> {
    simulate(solved, params, config).map(|s| s.report)
}

/// Runs pilot paths on reserved streams; any negative-rate abort puts the estimated
/// abort probability above the limit.
fn preflight(solved: &SolvedModel, params: &ModelParams, config: &SimConfig) -> Result<()> {
    let pilot = config.n_paths.min(PILOT_PATHS);
    let aborted = (0..pilot as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = path_rng(config.seed, PILOT_STREAM_BASE + i);
            run_path_with(&mut rng, solved, params, config, i)
        })
        .map(|r| match r {
            Ok(_) => Ok(0usize),
            Err(Error::NegativeRate { .. }) => Ok(1),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    if aborted as f64 > MAX_ABORT_FRACTION * pilot as f64 {
        return Err(Error::PreflightRefused { aborted, pilot });
    }
    Ok(())
}

fn summarize(
    records: &[PathRecord],
    solved: &SolvedModel,
    config: &SimConfig,
    aborted: usize,
) -> SimReport {
    let costs: Vec<f64> = records.iter().map(PathRecord::total_cost).collect();
    let n = costs.len();
    let mean_cost = mean(&costs);
    let stderr = (n >= 2).then(|| {
        let var = costs
            .iter()
            .map(|c| (c - mean_cost) * (c - mean_cost))
            .sum::<f64>()
            / (n - 1) as f64;
        (var / n as f64).sqrt()
    });
    let mut sorted = costs.clone();
    sorted.sort_by(f64::total_cmp);
    let cost_quantiles = Quantiles {
        p05: quantile(&sorted, 0.05),
        p25: quantile(&sorted, 0.25),
        p50: quantile(&sorted, 0.50),
        p75: quantile(&sorted, 0.75),
        p95: quantile(&sorted, 0.95),
    };
    let shortfalls: Vec<f64> = records.iter().map(|r| r.terminal.q).collect();
    let sniped: f64 = records.iter().map(PathRecord::sniped).sum();
    let passive: f64 = records.iter().map(|r| r.passive_fills() as f64).sum();
    let traded = sniped + passive;
    let model_value = solved.initial_value(config.initial_state);
    SimReport {
        mode: config.mode,
        n_paths: n,
        mean_cost,
        stderr,
        cost_quantiles,
        mean_completion_shortfall: mean(&shortfalls),
        snipe_share: (traded != 0.0).then(|| sniped / traded),
        clamp_count: records.iter().map(|r| r.clamps).sum(),
        aborted_paths: aborted,
        model_value,
        z_score: stderr
            .filter(|s| *s > 0.0)
            .map(|s| (mean_cost - model_value).abs() / s),
        label: (config.mode == SimMode::Overlay).then(|| OVERLAY_LABEL.to_string()),
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let h = (n - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}
