use std::fs;
use std::path::{Path, PathBuf};

use cop_lqr::config::{Format, RunConfig};
use cop_lqr::io::{fmt_f64, read_solution_csv, write_paths_csv, write_solution_csv};
use cop_lqr::sim::{simulate as run_simulation, SimMode, SimReport};
use cop_lqr::verify::verify as run_verify;
use cop_lqr::{solve_backward, Error, ExecState, ModelParams, SolvedModel};
use serde::Serialize;

use crate::{
    Axis, Common, Failure, Range, EXIT_ABORT, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER, EXIT_VERIFY,
};

fn code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. } | Error::StepOutOfRange { .. } | Error::Table(_) => {
            EXIT_CONFIG
        }
        Error::PreflightRefused { .. } | Error::AbortFraction { .. } => EXIT_ABORT,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(code_for(&e), e.to_string())
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Parsed config with command-line overrides applied.
struct Run {
    config: RunConfig,
    params: ModelParams,
    out: PathBuf,
    formats: Vec<Format>,
}

fn load(common: &Common) -> Result<Run, Failure> {
    let text = fs::read_to_string(&common.config).map_err(|e| io_failure(&common.config, e))?;
    let mut config = RunConfig::parse(&text)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", common.config.display())))?;
    if let Some(seed) = common.seed {
        config.simulation.seed = seed;
    }
    let params = config.params();
    for w in params.warnings() {
        eprintln!("warning: {w}");
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| config.output.dir.clone());
    fs::create_dir_all(&out).map_err(|e| io_failure(&out, e))?;
    let formats = match common.format {
        Some(f) => vec![f.into()],
        None => config.output.formats.clone(),
    };
    Ok(Run {
        config,
        params,
        out,
        formats,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_failure(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn create(path: &Path) -> Result<fs::File, Failure> {
    fs::File::create(path).map_err(|e| io_failure(path, e))
}

#[derive(Serialize)]
struct TableRow {
    n: usize,
    alpha: f64,
    beta_q: f64,
    beta_lambda: f64,
    p11: f64,
    p12: f64,
    p22: f64,
    b1: f64,
    b2: f64,
    c: f64,
}

fn table_rows(solved: &SolvedModel) -> Vec<TableRow> {
    solved
        .policies
        .iter()
        .zip(&solved.values)
        .enumerate()
        .map(|(n, (p, v))| TableRow {
            n,
            alpha: p.alpha,
            beta_q: p.beta_q,
            beta_lambda: p.beta_lambda,
            p11: v.p11,
            p12: v.p12,
            p22: v.p22,
            b1: v.b1,
            b2: v.b2,
            c: v.c,
        })
        .collect()
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    n_steps: usize,
    initial_state: ExecState,
    initial_value: f64,
    initial_action: f64,
    positive_definite: Vec<bool>,
    all_positive_definite: bool,
    warnings: Vec<String>,
    tables: &'a [String],
}

pub fn solve(common: &Common) -> Result<u8, Failure> {
    let run = load(common)?;
    let solved = solve_backward(&run.params)?;
    let mut written = Vec::new();
    for f in &run.formats {
        let path = match f {
            Format::Csv => {
                let path = run.out.join("policy.csv");
                write_solution_csv(&solved, create(&path)?).map_err(|e| io_failure(&path, e))?;
                path
            }
            Format::Json => {
                let path = run.out.join("policy.json");
                write_json(&path, &table_rows(&solved))?;
                path
            }
        };
        written.push(path.display().to_string());
    }
    let x0 = run.config.simulation.initial_state;
    let pd: Vec<bool> = solved.values[..solved.n_steps()]
        .iter()
        .map(|v| v.is_positive_definite())
        .collect();
    let summary = SolveSummary {
        n_steps: solved.n_steps(),
        initial_state: x0,
        initial_value: solved.initial_value(x0),
        initial_action: solved.initial_action(x0),
        all_positive_definite: pd.iter().all(|&b| b),
        positive_definite: pd,
        warnings: run.params.warnings(),
        tables: &written,
    };
    write_json(&run.out.join("summary.json"), &summary)?;
    println!(
        "solved {} steps: V_0 = {:.6}, u*_0 = {:.6} at (q, lambda) = ({}, {})",
        summary.n_steps, summary.initial_value, summary.initial_action, x0.q, x0.lambda
    );
    Ok(0)
}

pub fn verify(common: &Common, tables: Option<&Path>) -> Result<u8, Failure> {
    let run = load(common)?;
    let solved = match tables {
        Some(path) => {
            let file = fs::File::open(path).map_err(|e| io_failure(path, e))?;
            let solved = read_solution_csv(file, run.params.gamma_terminal())
                .map_err(|e| Failure::new(code_for(&e), format!("{}: {e}", path.display())))?;
            if solved.n_steps() != run.params.n_steps() {
                return Err(Failure::new(
                    EXIT_CONFIG,
                    format!(
                        "{}: table has {} steps, config has {}",
                        path.display(),
                        solved.n_steps(),
                        run.params.n_steps()
                    ),
                ));
            }
            solved
        }
        None => solve_backward(&run.params)?,
    };
    let report = run_verify(&run.params, &solved, &run.config.oracle);
    write_json(&run.out.join("verify.json"), &report)?;
    for c in &report.checks {
        let resid = c
            .max_residual
            .map_or(String::new(), |r| format!(" max residual {r:.3e}"));
        let tol = c
            .tolerance
            .map_or(String::new(), |t| format!(" (tolerance {t:e})"));
        let note = c
            .note
            .as_deref()
            .map_or(String::new(), |n| format!(" [{n}]"));
        println!(
            "{} {}{resid}{tol}{note}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name
        );
    }
    Ok(if report.passed { 0 } else { EXIT_VERIFY })
}

pub fn simulate(common: &Common, paths_out: Option<&Path>) -> Result<u8, Failure> {
    let run = load(common)?;
    let solved = solve_backward(&run.params)?;
    let sim = run_simulation(&solved, &run.params, &run.config.simulation.to_sim_config())?;
    write_json(&run.out.join("report.json"), &sim.report)?;
    if let Some(path) = paths_out {
        write_paths_csv(&sim.records, create(path)?).map_err(|e| io_failure(path, e))?;
    }
    let r = &sim.report;
    if let Some(label) = &r.label {
        println!("{label}");
    }
    match (r.stderr, r.z_score) {
        (Some(se), Some(z)) => println!(
            "mean cost {:.6} +/- {:.6}, V_0 = {:.6}, |mean - V_0| / stderr = {z:.3}",
            r.mean_cost, se, r.model_value
        ),
        _ => println!("cost {:.17e}, V_0 = {:.17e}", r.mean_cost, r.model_value),
    }
    Ok(0)
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    status: &'static str,
    initial_value: Option<f64>,
    initial_action: Option<f64>,
    mean_cost: Option<f64>,
    stderr: Option<f64>,
    snipe_share: Option<f64>,
    mean_completion_shortfall: Option<f64>,
    detail: Option<String>,
}

fn sweep_point(run: &Run, axis: Axis, value: f64) -> SweepRow {
    let mut row = SweepRow {
        value,
        status: "ok",
        initial_value: None,
        initial_action: None,
        mean_cost: None,
        stderr: None,
        snipe_share: None,
        mean_completion_shortfall: None,
        detail: None,
    };
    let mut sim = run.config.simulation.to_sim_config();
    let params = match axis {
        Axis::Eta => run.params.with_eta(value),
        Axis::GammaTerminal => run.params.with_gamma_terminal(value),
        Axis::Lambda0 => {
            sim.initial_state.lambda = value;
            sim.validate().map(|()| run.params.clone())
        }
    };
    let params = match params {
        Ok(p) => p,
        Err(e) => {
            row.status = "invalid";
            row.detail = Some(e.to_string());
            return row;
        }
    };
    let solved = match solve_backward(&params) {
        Ok(s) => s,
        Err(e) => {
            row.status = "solver_fault";
            row.detail = Some(e.to_string());
            return row;
        }
    };
    row.initial_value = Some(solved.initial_value(sim.initial_state));
    row.initial_action = Some(solved.initial_action(sim.initial_state));
    match run_simulation(&solved, &params, &sim) {
        Ok(s) => {
            let r: SimReport = s.report;
            row.mean_cost = Some(r.mean_cost);
            row.stderr = r.stderr;
            row.snipe_share = r.snipe_share;
            row.mean_completion_shortfall = Some(r.mean_completion_shortfall);
            if sim.mode == SimMode::Overlay {
                row.detail = r.label;
            }
        }
        Err(e) => {
            row.status = "simulation_failed";
            row.detail = Some(e.to_string());
        }
    }
    row
}

fn cell(x: Option<f64>) -> String {
    x.map_or(String::new(), fmt_f64)
}

pub fn sweep(common: &Common, axis: Axis, range: Range) -> Result<u8, Failure> {
    let run = load(common)?;
    let rows: Vec<SweepRow> = range
        .points()
        .into_iter()
        .map(|v| sweep_point(&run, axis, v))
        .collect();
    for f in &run.formats {
        match f {
            Format::Csv => {
                let path = run.out.join("sweep.csv");
                write_sweep_csv(&path, axis, &rows).map_err(|e| io_failure(&path, e))?;
            }
            Format::Json => write_json(&run.out.join("sweep.json"), &rows)?,
        }
    }
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!(
        "swept {} over {} points, {failed} failed",
        axis.column(),
        rows.len()
    );
    Ok(0)
}

fn write_sweep_csv(path: &Path, axis: Axis, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record([
        axis.column(),
        "status",
        "V_0",
        "u_0",
        "mean_cost",
        "stderr",
        "snipe_share",
        "E_q_N",
        "detail",
    ])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.value),
            r.status.to_string(),
            cell(r.initial_value),
            cell(r.initial_action),
            cell(r.mean_cost),
            cell(r.stderr),
            cell(r.snipe_share),
            cell(r.mean_completion_shortfall),
            r.detail.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
