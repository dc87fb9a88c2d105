//! Finite-volume laboratory for a two-population tumor growth model with
//! singular pressure `p = κ n / (1 - n)`.
//!
//! The crate simulates the degenerate κ-system and its ε-regularization in
//! one space dimension, evaluates the a priori estimates and residuals that
//! control the stiff limit κ → 0, and checks pairwise convergence rates
//! across parameter sweeps.

// NaN-rejecting guards and index loops over several fields are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod grid;
pub mod limit;
pub mod linalg;
pub mod model;
pub mod solver;

pub use grid::{Field, Grid, State};
pub use model::{KineticFunctions, ModelParams, PressureLaw};
pub use solver::{run, SimConfig, Trajectory};
