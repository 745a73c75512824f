//! Table and log serialization. Floats in CSV are written with 17 significant digits so
//! that every `f64` reads back bit-for-bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::quadratic::{AffinePolicy, QuadraticValue};
use crate::sim::PathRecord;
use crate::solver::SolvedModel;

pub const SOLUTION_COLUMNS: [&str; 10] = [
    "n",
    "alpha",
    "beta_q",
    "beta_lambda",
    "p11",
    "p12",
    "p22",
    "b1",
    "b2",
    "c",
];
pub const PATH_COLUMNS: [&str; 7] = ["path", "n", "q", "lambda", "u", "W", "stage_cost"];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per action time: the policy at `t_n` and the value function `V_n`.
pub fn write_solution_csv<W: Write>(solved: &SolvedModel, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(SOLUTION_COLUMNS)?;
    for (n, (p, v)) in solved.policies.iter().zip(&solved.values).enumerate() {
        let mut row = vec![n.to_string()];
        row.extend(
            [
                p.alpha,
                p.beta_q,
                p.beta_lambda,
                v.p11,
                v.p12,
                v.p22,
                v.b1,
                v.b2,
                v.c,
            ]
            .into_iter()
            .map(fmt_f64),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_solution_csv`]. The terminal value is not stored in
/// the table and is rebuilt from `gamma_terminal`.
pub fn read_solution_csv<R: Read>(input: R, gamma_terminal: f64) -> Result<SolvedModel> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(SOLUTION_COLUMNS) {
        return Err(Error::Table(format!("unexpected header {header:?}")));
    }
    let mut policies = Vec::new();
    let mut values = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let n: usize = row[0]
            .parse()
            .map_err(|_| Error::Table(format!("row {}: bad step index {:?}", i + 1, &row[0])))?;
        if n != i {
            return Err(Error::Table(format!(
                "row {}: expected step {i}, found {n}",
                i + 1
            )));
        }
        let mut f = [0.0; 9];
        for (k, slot) in f.iter_mut().enumerate() {
            *slot = row[k + 1].parse().map_err(|_| {
                Error::Table(format!(
                    "row {}: bad {} {:?}",
                    i + 1,
                    SOLUTION_COLUMNS[k + 1],
                    &row[k + 1]
                ))
            })?;
        }
        policies.push(AffinePolicy {
            alpha: f[0],
            beta_q: f[1],
            beta_lambda: f[2],
        });
        values.push(QuadraticValue {
            p11: f[3],
            p12: f[4],
            p22: f[5],
            b1: f[6],
            b2: f[7],
            c: f[8],
        });
    }
    if policies.is_empty() {
        return Err(Error::Table("no rows".into()));
    }
    values.push(QuadraticValue {
        p11: gamma_terminal,
        p12: 0.0,
        p22: 0.0,
        b1: 0.0,
        b2: 0.0,
        c: 0.0,
    });
    Ok(SolvedModel { values, policies })
}

/// Per-step path logs. Each path ends with a row for `t_N` whose `u` and `W` are empty
/// and whose `stage_cost` is the terminal cost.
pub fn write_paths_csv<W: Write>(records: &[PathRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(PATH_COLUMNS)?;
    for rec in records {
        let path = rec.path.to_string();
        for s in &rec.steps {
            w.write_record([
                path.clone(),
                s.n.to_string(),
                fmt_f64(s.q),
                fmt_f64(s.lambda),
                fmt_f64(s.u),
                s.w.to_string(),
                fmt_f64(s.stage_cost),
            ])?;
        }
        w.write_record([
            path,
            rec.steps.len().to_string(),
            fmt_f64(rec.terminal.q),
            fmt_f64(rec.terminal.lambda),
            String::new(),
            String::new(),
            fmt_f64(rec.terminal_cost),
        ])?;
    }
    w.flush()?;
    Ok(())
}
