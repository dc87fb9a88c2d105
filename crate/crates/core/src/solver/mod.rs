//! Time integration of the degenerate κ-system and its ε-regularization.
//!
//! One step is split as implicit total-density diffusion, explicit upwind
//! species transport with reactions, then a semi-implicit nutrient solve.

mod config;
mod run;
mod steps;

pub use config::{DtControl, GridSpec, InitialCondition, Mode, NewtonSettings, SimConfig, DT_GROWTH};
pub use run::{run, RunError, StepRecord, Trajectory};
pub use steps::{
    density_fluxes, heun_reactions, kirchhoff_face_velocity, step_kappa, step_nutrient, step_regularized, step_species,
    step_total_density, HeunReactions, NewtonOutcome, StepContext, StepOutcome,
};

use crate::grid::{GridError, StateViolation};
use crate::model::ModelError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    State(#[from] StateViolation),
    #[error("Newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("CFL number {cfl_number} exceeds {limit}")]
    CflViolation { cfl_number: f64, limit: f64 },
    #[error("rescale factor {factor} in cell {cell} outside [1 - 10 dt, 1 + 10 dt] for dt = {dt}")]
    RescaleOutOfBand { cell: usize, factor: f64, dt: f64 },
    #[error("singular tridiagonal system")]
    LinearSolve,
    #[error("invalid `{field}`: {reason}")]
    Config { field: &'static str, reason: &'static str },
    #[error("time step {dt:e} underflowed at t = {t}")]
    DtUnderflow { t: f64, dt: f64 },
}

impl SolverError {
    /// Errors that a smaller time step can cure.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            SolverError::NewtonDivergence { .. }
                | SolverError::CflViolation { .. }
                | SolverError::RescaleOutOfBand { .. }
                | SolverError::State(_)
                | SolverError::LinearSolve
        )
    }
}
