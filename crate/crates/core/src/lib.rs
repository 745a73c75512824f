//! Stochastic linear-quadratic model for child order placement.
//!
//! A buy child order holds `q` outstanding lots and rests a single passive lot that is
//! hit at Poisson rate `lambda`. At each action time the trader may snipe `u` lots at the
//! far touch; sniping costs a half-spread per lot (modelled as `u^2`), saves nothing on
//! passive fills and lowers the hit rate by `eta u`. Delay is penalized by `gamma_n q^2`.
//! The optimal policy is affine in `(q, lambda)` and the value functions are quadratic;
//! [`solve_backward`] computes both by backward recursion.
//!
//! All costs are in half-spreads, time in minutes, rates in lots per minute.
//!
//! - [`oracle`]: brute-force checks (Poisson sums, scalar minimization, grid DP).
//! - [`sim`]: seeded Monte Carlo of the policy and impact calibration.
//! - [`config`], [`io`], [`verify`]: run configuration, tables and the verification suite.

// `!(a < b)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod quadratic;
pub mod sim;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{step_matrices_for, ExecState, GammaSchedule, Mat2, ModelParams};
pub use quadratic::{AffinePolicy, QuadraticValue, PD_REL_TOL};
pub use solver::{backstep, last_period_policy, solve_backward, terminal_value, SolvedModel};
