//! Independent numerical checks of the closed-form solution: truncated-Poisson
//! expectations, scalar minimization of the Bellman right-hand side and a gridded
//! dynamic program. Nothing here reuses the solver's algebra.

mod bellman;
mod grid;
mod minimize;
mod poisson;

pub use bellman::{bellman_rhs_folded, bellman_rhs_raw, stage_cost};
pub use grid::{grid_dp, GridGap, GridSpec, GridTables, Region, GRID_TAIL};
pub use minimize::{default_bracket, golden_section, minimize_u, Minimum};
pub use poisson::PoissonSpec;
