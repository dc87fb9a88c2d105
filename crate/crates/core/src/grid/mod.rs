//! Uniform 1D finite-volume mesh, cell-averaged fields and norms.

pub(crate) mod operators;
mod state;

pub use operators::{
    advective_flux_divergence, diffusion_flux_divergence, face_average, gradient_at_faces, laplacian, FaceAverage,
};
pub use state::{validate_initial_state, InitialStateReport, State, StateViolation, NEGATIVITY_TOL};

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 4 cells, got {0}")]
    TooFewCells(usize),
    #[error("degenerate interval [{a}, {b}]")]
    Interval { a: f64, b: f64 },
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("operator requires a {expected} field")]
    TagMismatch { expected: &'static str },
    #[error("negative face coefficient {value} at face {face}")]
    NegativeCoefficient { face: usize, value: f64 },
}

/// Uniform cell-centered mesh of `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    cells: usize,
    a: f64,
    b: f64,
}

impl Grid {
    pub fn new(cells: usize, a: f64, b: f64) -> Result<Self, GridError> {
        if cells < 4 {
            return Err(GridError::TooFewCells(cells));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(GridError::Interval { a, b });
        }
        Ok(Self { cells, a, b })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn faces(&self) -> usize {
        self.cells + 1
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.a + (i as f64 + 0.5) * self.h()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }

    pub fn face(&self, j: usize) -> f64 {
        self.a + j as f64 * self.h()
    }

    /// Samples `f` at the cell centers.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.cells).map(|i| f(self.center(i))).collect()
    }

    pub fn check_len(&self, values: &[f64]) -> Result<(), GridError> {
        if values.len() != self.cells {
            return Err(GridError::Length {
                expected: self.cells,
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn norm_l1(&self, values: &[f64]) -> f64 {
        self.h() * values.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn norm_l2(&self, values: &[f64]) -> f64 {
        (self.h() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn norm_linf(&self, values: &[f64]) -> f64 {
        values.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// `h Σ v`, the discrete integral over the domain.
    pub fn integral(&self, values: &[f64]) -> f64 {
        self.h() * values.iter().sum::<f64>()
    }

    /// L¹ distance between two fields on this grid.
    pub fn distance_l1(&self, u: &[f64], v: &[f64]) -> f64 {
        self.h() * u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Boundary condition carried by a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BoundaryTag {
    NoFlux,
    Dirichlet(f64),
}

/// Cell-averaged scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    tag: BoundaryTag,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, tag: BoundaryTag) -> Result<Self, GridError> {
        grid.check_len(&values)?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GridError::NonFinite { index, value });
        }
        Ok(Self { grid, values, tag })
    }

    pub fn no_flux(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        Self::new(grid, values, BoundaryTag::NoFlux)
    }

    pub fn dirichlet(grid: Grid, values: Vec<f64>, boundary: f64) -> Result<Self, GridError> {
        Self::new(grid, values, BoundaryTag::Dirichlet(boundary))
    }

    pub fn constant(grid: Grid, value: f64, tag: BoundaryTag) -> Self {
        Self {
            grid,
            values: vec![value; grid.cells()],
            tag,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> BoundaryTag {
        self.tag
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm_l1(&self) -> f64 {
        self.grid.norm_l1(&self.values)
    }

    pub fn norm_l2(&self) -> f64 {
        self.grid.norm_l2(&self.values)
    }

    pub fn norm_linf(&self) -> f64 {
        self.grid.norm_linf(&self.values)
    }
}
