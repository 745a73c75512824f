//! Seeded Monte Carlo execution of a solved policy through the Poisson fill dynamics.

mod calibrate;
mod path;
mod report;
mod rng;

pub use calibrate::{calibrate_impact, ImpactEstimate};
pub use path::{run_path, step_state, PathRecord, SimConfig, SimMode, StepRecord};
pub use report::{
    monte_carlo, simulate, Quantiles, SimReport, Simulation, MAX_ABORT_FRACTION, OVERLAY_LABEL,
    PILOT_PATHS,
};
pub use rng::{path_rng, sample_poisson};
