//! Brute-force dynamic program on a `(q, lambda)` grid.
//!
//! Value tables are stored at the nodes and read back by bilinear interpolation. At every
//! node the truncated-Poisson Bellman right-hand side is minimized numerically over `u`.
//! A node whose expectation would read outside the valid part of the next table is marked
//! invalid (NaN), so the trustworthy region shrinks as the recursion moves backward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ExecState, ModelParams};
use crate::oracle::bellman::stage_cost;
use crate::oracle::minimize::{default_bracket, golden_section};
use crate::solver::SolvedModel;

/// Poisson tail mass ignored when taking expectations on the grid.
pub const GRID_TAIL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub q_min: f64,
    pub q_max: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl Region {
    pub fn contains(&self, x: ExecState) -> bool {
        (self.q_min..=self.q_max).contains(&x.q)
            && (self.lambda_min..=self.lambda_max).contains(&x.lambda)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub q_min: f64,
    pub q_max: f64,
    pub n_q: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub n_lambda: usize,
    /// Number of points in the coarse control scan over the default bracket.
    #[serde(default = "default_u_scan")]
    pub u_scan: usize,
    /// States whose values must be resolved at every step.
    pub check: Region,
}

fn default_u_scan() -> usize {
    81
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_min < self.q_max) {
            return Err(Error::invalid("grid.q_min", "q_min must be below q_max"));
        }
        if !(self.lambda_min < self.lambda_max) {
            return Err(Error::invalid(
                "grid.lambda_min",
                "lambda_min must be below lambda_max",
            ));
        }
        if self.lambda_min < 0.0 {
            return Err(Error::invalid("grid.lambda_min", "rates are nonnegative"));
        }
        if self.n_q < 2 || self.n_lambda < 2 {
            return Err(Error::invalid(
                "grid.n_q",
                "need at least two nodes per axis",
            ));
        }
        if self.u_scan < 5 {
            return Err(Error::invalid(
                "grid.u_scan",
                "need at least five scan points",
            ));
        }
        let c = &self.check;
        if !(c.q_min <= c.q_max && c.lambda_min <= c.lambda_max) {
            return Err(Error::invalid("grid.check", "empty check region"));
        }
        Ok(())
    }

    /// Same box with `factor` times as many cells per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_q: (self.n_q - 1) * factor + 1,
            n_lambda: (self.n_lambda - 1) * factor + 1,
            ..*self
        }
    }

    fn q_step(&self) -> f64 {
        (self.q_max - self.q_min) / (self.n_q - 1) as f64
    }

    fn lambda_step(&self) -> f64 {
        (self.lambda_max - self.lambda_min) / (self.n_lambda - 1) as f64
    }

    pub fn node(&self, i: usize, j: usize) -> ExecState {
        ExecState::new(
            self.q_min + i as f64 * self.q_step(),
            self.lambda_min + j as f64 * self.lambda_step(),
        )
    }

    fn n_nodes(&self) -> usize {
        self.n_q * self.n_lambda
    }
}

/// Gridded value tables for `t_0 ..= t_N`. Invalid nodes hold NaN.
#[derive(Debug, Clone)]
pub struct GridTables {
    pub spec: GridSpec,
    pub tables: Vec<Vec<f64>>,
}

/// Worst discrepancy between the grid and a closed-form solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridGap {
    /// `max |grid - V| / (1 + |V|)` over check-region nodes and steps `0..N`.
    pub max_relative: f64,
    pub step: usize,
    pub q: f64,
    pub lambda: f64,
    pub nodes_compared: usize,
}

impl GridTables {
    pub fn value_at(&self, n: usize, x: ExecState) -> Result<f64> {
        let table = self.tables.get(n).ok_or(Error::StepOutOfRange {
            index: n,
            n_steps: self.tables.len().saturating_sub(1),
        })?;
        interpolate(&self.spec, table, x).ok_or(Error::OffGrid {
            step: n,
            q: x.q,
            lambda: x.lambda,
        })
    }

    pub fn gap_against(&self, solved: &SolvedModel) -> GridGap {
        let mut gap = GridGap {
            max_relative: 0.0,
            step: 0,
            q: f64::NAN,
            lambda: f64::NAN,
            nodes_compared: 0,
        };
        let spec = &self.spec;
        for n in 0..self.tables.len() - 1 {
            for i in 0..spec.n_q {
                for j in 0..spec.n_lambda {
                    let x = spec.node(i, j);
                    if !spec.check.contains(x) {
                        continue;
                    }
                    let exact = solved.values[n].value_at(x);
                    let rel =
                        (self.tables[n][i * spec.n_lambda + j] - exact).abs() / (1.0 + exact.abs());
                    gap.nodes_compared += 1;
                    if !(rel <= gap.max_relative) {
                        gap = GridGap {
                            max_relative: rel,
                            step: n,
                            q: x.q,
                            lambda: x.lambda,
                            ..gap
                        };
                    }
                }
            }
        }
        gap
    }
}

fn interpolate(spec: &GridSpec, table: &[f64], x: ExecState) -> Option<f64> {
    let fq = (x.q - spec.q_min) / spec.q_step();
    let fl = (x.lambda - spec.lambda_min) / spec.lambda_step();
    if !(fq >= 0.0 && fl >= 0.0) {
        return None;
    }
    let (i, j) = (fq.floor() as usize, fl.floor() as usize);
    let (i, tq) = cell(i, fq, spec.n_q)?;
    let (j, tl) = cell(j, fl, spec.n_lambda)?;
    let at = |a: usize, b: usize| table[a * spec.n_lambda + b];
    let v = (1.0 - tq) * ((1.0 - tl) * at(i, j) + tl * at(i, j + 1))
        + tq * ((1.0 - tl) * at(i + 1, j) + tl * at(i + 1, j + 1));
    v.is_finite().then_some(v)
}

/// Lower cell index and fractional offset; the last node belongs to the final cell.
fn cell(i: usize, f: f64, n: usize) -> Option<(usize, f64)> {
    if i + 1 < n {
        Some((i, f - i as f64))
    } else if i + 1 == n && f == i as f64 {
        Some((i - 1, 1.0))
    } else {
        None
    }
}

/// Expected cost of sniping `u` at node `x`, or infinity if the expectation leaves the
/// valid region of `next` or the post-snipe rate is negative.
fn node_objective(
    spec: &GridSpec,
    next: &[f64],
    x: ExecState,
    u: f64,
    gamma: f64,
    dt: f64,
    eta: f64,
) -> f64 {
    let rate = x.lambda - eta * u;
    if rate < 0.0 {
        return f64::INFINITY;
    }
    let mean = rate * dt;
    let mut p = (-mean).exp();
    let mut cum = 0.0;
    let mut acc = 0.0;
    let mut k = 0u64;
    loop {
        let Some(v) = interpolate(spec, next, ExecState::new(x.q - u - k as f64, rate)) else {
            return f64::INFINITY;
        };
        acc += p * (stage_cost(x, u, k, gamma) + v);
        cum += p;
        if (1.0 - cum < GRID_TAIL || p == 0.0) && k as f64 >= mean {
            break;
        }
        k += 1;
        p *= mean / k as f64;
    }
    acc
}

fn solve_node(spec: &GridSpec, next: &[f64], x: ExecState, gamma: f64, dt: f64, eta: f64) -> f64 {
    let f = |u: f64| node_objective(spec, next, x, u, gamma, dt, eta);
    let (lo, hi) = default_bracket(x, dt);
    let m = spec.u_scan;
    let step = (hi - lo) / (m - 1) as f64;
    let scan: Vec<f64> = (0..m).map(|k| f(lo + k as f64 * step)).collect();
    let Some((best, _)) = scan
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
    else {
        return f64::NAN;
    };
    if best == 0 || best == m - 1 {
        return f64::NAN;
    }
    let u_lo = lo + (best - 1) as f64 * step;
    let u_hi = lo + (best + 1) as f64 * step;
    let r = golden_section(f, u_lo, u_hi, 1e-9 * (1.0 + u_lo.abs().max(u_hi.abs())));
    // a minimizer pinned against an infeasible control is constrained, not a Bellman minimum
    let probe = 1e-6 * step;
    if !(f(r.u - probe).is_finite() && f(r.u + probe).is_finite()) {
        return f64::NAN;
    }
    r.value.min(scan[best])
}

/// Backward induction on the grid. Fails if any check-region node is unresolved.
pub fn grid_dp(params: &ModelParams, spec: &GridSpec) -> Result<GridTables> {
    spec.validate()?;
    let n_steps = params.n_steps();
    let terminal: Vec<f64> = (0..spec.n_nodes())
        .map(|idx| {
            let x = spec.node(idx / spec.n_lambda, idx % spec.n_lambda);
            params.gamma_terminal() * x.q * x.q
        })
        .collect();
    let mut tables = vec![Vec::new(); n_steps + 1];
    tables[n_steps] = terminal;
    for n in (0..n_steps).rev() {
        let (gamma, dt, eta) = (params.gamma()[n], params.dt()[n], params.eta());
        let next = &tables[n + 1];
        let table: Vec<f64> = (0..spec.n_nodes())
            .into_par_iter()
            .map(|idx| {
                let x = spec.node(idx / spec.n_lambda, idx % spec.n_lambda);
                solve_node(spec, next, x, gamma, dt, eta)
            })
            .collect();
        for (idx, v) in table.iter().enumerate() {
            let x = spec.node(idx / spec.n_lambda, idx % spec.n_lambda);
            if !v.is_finite() && spec.check.contains(x) {
                return Err(Error::OffGrid {
                    step: n,
                    q: x.q,
                    lambda: x.lambda,
                });
            }
        }
        tables[n] = table;
    }
    Ok(GridTables {
        spec: *spec,
        tables,
    })
}
