//! Discrete differential operators on cell-centered fields.
//!
//! Face arrays have `cells + 1` entries; face `j` sits between cells
//! `j - 1` and `j`, so faces `0` and `cells` are the walls.

use super::{BoundaryTag, Field, Grid, GridError};
use serde::Serialize;

/// How cell coefficients are combined onto interior faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceAverage {
    #[default]
    Arithmetic,
    Harmonic,
}

/// Interior face values of a cell coefficient; wall faces are zero.
pub fn face_average(grid: &Grid, cell: &[f64], mode: FaceAverage) -> Result<Vec<f64>, GridError> {
    grid.check_len(cell)?;
    let mut out = vec![0.0; grid.faces()];
    for j in 1..grid.cells() {
        let (l, r) = (cell[j - 1], cell[j]);
        out[j] = match mode {
            FaceAverage::Arithmetic => 0.5 * (l + r),
            FaceAverage::Harmonic => {
                if l + r > 0.0 {
                    2.0 * l * r / (l + r)
                } else {
                    0.0
                }
            }
        };
    }
    Ok(out)
}

/// Face gradients. No-flux walls get zero; Dirichlet walls use the mirrored
/// ghost value `2 g - f`.
pub fn gradient_at_faces(field: &Field) -> Vec<f64> {
    let grid = field.grid();
    let f = field.values();
    let (n, h) = (grid.cells(), grid.h());
    let mut out = vec![0.0; n + 1];
    for j in 1..n {
        out[j] = (f[j] - f[j - 1]) / h;
    }
    if let BoundaryTag::Dirichlet(g) = field.tag() {
        out[0] = 2.0 * (f[0] - g) / h;
        out[n] = 2.0 * (g - f[n - 1]) / h;
    }
    out
}

/// Second difference with Dirichlet ghost cells.
pub fn laplacian(field: &Field) -> Result<Vec<f64>, GridError> {
    let BoundaryTag::Dirichlet(_) = field.tag() else {
        return Err(GridError::TagMismatch { expected: "Dirichlet" });
    };
    let grad = gradient_at_faces(field);
    let h = field.grid().h();
    Ok(grad.windows(2).map(|w| (w[1] - w[0]) / h).collect())
}

/// Conservative `div(k ∇f)` with zero flux through the walls.
pub fn diffusion_flux_divergence(face_coeff: &[f64], field: &Field) -> Result<Vec<f64>, GridError> {
    if field.tag() != BoundaryTag::NoFlux {
        return Err(GridError::TagMismatch { expected: "no-flux" });
    }
    let grid = field.grid();
    check_faces(grid, face_coeff)?;
    if let Some((face, &value)) = face_coeff.iter().enumerate().find(|(_, k)| **k < 0.0) {
        return Err(GridError::NegativeCoefficient { face, value });
    }
    let grad = gradient_at_faces(field);
    let h = grid.h();
    let n = grid.cells();
    let flux = |j: usize| {
        if j == 0 || j == n {
            0.0
        } else {
            face_coeff[j] * grad[j]
        }
    };
    Ok((0..n).map(|i| (flux(i + 1) - flux(i)) / h).collect())
}

/// First-order upwind `div(s v)` from face velocities; wall fluxes are zero.
pub fn advective_flux_divergence(species: &Field, face_velocity: &[f64]) -> Result<Vec<f64>, GridError> {
    let grid = species.grid();
    check_faces(grid, face_velocity)?;
    let flux = upwind_fluxes(species.values(), face_velocity);
    let h = grid.h();
    Ok(flux.windows(2).map(|w| (w[1] - w[0]) / h).collect())
}

/// Upwind face fluxes `v⁺ s_left + v⁻ s_right`, zero at the walls.
pub(crate) fn upwind_fluxes(s: &[f64], v: &[f64]) -> Vec<f64> {
    let n = s.len();
    let mut flux = vec![0.0; n + 1];
    for j in 1..n {
        flux[j] = v[j].max(0.0) * s[j - 1] + v[j].min(0.0) * s[j];
    }
    flux
}

fn check_faces(grid: &Grid, faces: &[f64]) -> Result<(), GridError> {
    if faces.len() != grid.faces() {
        return Err(GridError::Length {
            expected: grid.faces(),
            got: faces.len(),
        });
    }
    Ok(())
}
