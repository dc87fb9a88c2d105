use super::{BoundaryTag, Field, Grid, GridError};
use crate::model::{ModelError, PressureLaw};
use serde::Serialize;
use thiserror::Error;

/// Tolerated scheme noise below zero.
pub const NEGATIVITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateViolation {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{field}[{index}] = {value} is negative")]
    Negative {
        field: &'static str,
        index: usize,
        value: f64,
    },
}

/// Population and nutrient fields at one time, with cached `n`, `p`, `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    t: f64,
    grid: Grid,
    law: PressureLaw,
    c_inf: f64,
    n_l: Vec<f64>,
    n_d: Vec<f64>,
    c: Vec<f64>,
    n: Vec<f64>,
    p: Vec<f64>,
    h: Vec<f64>,
}

impl State {
    pub fn new(
        grid: Grid,
        law: PressureLaw,
        c_inf: f64,
        t: f64,
        n_l: Vec<f64>,
        n_d: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self, StateViolation> {
        for (field, values) in [("n_l", &n_l), ("n_d", &n_d), ("c", &c)] {
            Field::no_flux(grid, values.clone())?;
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| **v < -NEGATIVITY_TOL) {
                return Err(StateViolation::Negative { field, index, value });
            }
        }
        let n: Vec<f64> = n_l.iter().zip(&n_d).map(|(a, b)| a + b).collect();
        let mut p = Vec::with_capacity(n.len());
        let mut h = Vec::with_capacity(n.len());
        for &ni in &n {
            let ni = ni.max(0.0);
            p.push(law.pressure(ni)?);
            h.push(law.enthalpy(ni)?);
        }
        Ok(Self {
            t,
            grid,
            law,
            c_inf,
            n_l,
            n_d,
            c,
            n,
            p,
            h,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }
    pub fn with_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn law(&self) -> PressureLaw {
        self.law
    }
    pub fn kappa(&self) -> f64 {
        self.law.kappa()
    }
    pub fn c_inf(&self) -> f64 {
        self.c_inf
    }
    pub fn n_l(&self) -> &[f64] {
        &self.n_l
    }
    pub fn n_d(&self) -> &[f64] {
        &self.n_d
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    /// Total density `n_l + n_d`.
    pub fn n(&self) -> &[f64] {
        &self.n
    }
    pub fn p(&self) -> &[f64] {
        &self.p
    }
    /// Enthalpy `H_κ(n)`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn field(&self, values: &[f64]) -> Field {
        Field::no_flux(self.grid, values.to_vec()).expect("state fields are finite")
    }

    pub fn nutrient_field(&self) -> Field {
        Field::new(self.grid, self.c.clone(), BoundaryTag::Dirichlet(self.c_inf)).expect("state fields are finite")
    }

    pub fn mass(&self) -> f64 {
        self.grid.integral(&self.n)
    }

    pub fn max_n(&self) -> f64 {
        self.n.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_component(&self) -> f64 {
        self.n_l
            .iter()
            .chain(&self.n_d)
            .chain(&self.c)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_c(&self) -> f64 {
        self.c.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest deviation of the caches from recomputation.
    pub fn cache_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n.len() {
            let n = self.n_l[i] + self.n_d[i];
            let nn = n.max(0.0);
            worst = worst
                .max((self.n[i] - n).abs())
                .max((self.p[i] - self.law.pressure_unchecked(nn)).abs())
                .max((self.h[i] - self.law.enthalpy_unchecked(nn)).abs());
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialStateReport {
    pub passed: bool,
    pub max_n: f64,
    /// `(field, cell)` of the first violation.
    pub witness: Option<(&'static str, usize)>,
}

/// Nonnegativity of all fields and `max n ≤ 1 - θ_min`.
pub fn validate_initial_state(state: &State, theta_min: f64) -> InitialStateReport {
    let max_n = state.max_n();
    for (name, values) in [("n_l", state.n_l()), ("n_d", state.n_d()), ("c", state.c())] {
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return InitialStateReport {
                passed: false,
                max_n,
                witness: Some((name, i)),
            };
        }
    }
    if let Some(i) = state.n().iter().position(|&v| v > 1.0 - theta_min) {
        return InitialStateReport {
            passed: false,
            max_n,
            witness: Some(("n", i)),
        };
    }
    InitialStateReport {
        passed: true,
        max_n,
        witness: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(n_l: Vec<f64>, n_d: Vec<f64>, c: Vec<f64>) -> Result<State, StateViolation> {
        let g = Grid::new(n_l.len(), 0.0, 1.0).unwrap();
        State::new(g, PressureLaw::new(0.3).unwrap(), 1.0, 0.0, n_l, n_d, c)
    }

    #[test]
    fn caches_are_consistent() {
        let s = state(vec![0.1, 0.2, 0.3, 0.4], vec![0.05, 0.0, 0.1, 0.2], vec![1.0; 4]).unwrap();
        assert!(s.cache_defect() <= 1e-14);
        assert_eq!(s.n()[3], 0.4 + 0.2);
    }

    #[test]
    fn saturation_is_rejected() {
        assert!(state(vec![0.6; 4], vec![0.5; 4], vec![1.0; 4]).is_err());
    }

    #[test]
    fn initial_validation() {
        let s = state(vec![0.2; 4], vec![0.2; 4], vec![1.0; 4]).unwrap();
        let r = validate_initial_state(&s, 0.1);
        assert!(r.passed);
        assert!((r.max_n - 0.4).abs() < 1e-15);

        let s = state(vec![0.2, -1e-13, 0.2, 0.2], vec![0.2; 4], vec![1.0; 4]).unwrap();
        let r = validate_initial_state(&s, 0.1);
        assert_eq!(r.witness, Some(("n_l", 1)));

        let s = state(vec![0.5, 0.95, 0.1, 0.1], vec![0.0; 4], vec![1.0; 4]).unwrap();
        let r = validate_initial_state(&s, 0.1);
        assert!(!r.passed);
        assert_eq!(r.witness, Some(("n", 1)));
    }
}
