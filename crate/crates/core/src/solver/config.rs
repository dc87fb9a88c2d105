use super::SolverError;
use crate::grid::{FaceAverage, Grid, State};
use crate::model::{ModelParams, PressureLaw};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub cells: usize,
    pub a: f64,
    pub b: f64,
    pub face_average: FaceAverage,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cells: 200,
            a: 0.0,
            b: 10.0,
            face_average: FaceAverage::Arithmetic,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, SolverError> {
        Ok(Grid::new(self.cells, self.a, self.b)?)
    }
}

/// Which system is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// κ-system in enthalpy form.
    #[default]
    Degenerate,
    /// Non-degenerate ε-regularization.
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DtControl {
    Fixed {
        dt: f64,
    },
    /// Grows by [`DT_GROWTH`] after accepted steps, capped by `max` and the CFL bound.
    Adaptive {
        initial: f64,
        max: f64,
    },
}

pub const DT_GROWTH: f64 = 1.2;

impl Default for DtControl {
    fn default() -> Self {
        DtControl::Adaptive {
            initial: 1e-4,
            max: 2e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
        }
    }
}

/// Gaussian bump of live cells on a uniform nutrient background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialCondition {
    pub amplitude: f64,
    /// Bump width as a fraction of the domain length.
    pub width_fraction: f64,
    /// Add `κ` to `n_l`, `n_d` and `c`.
    pub kappa_offset: bool,
    pub theta_min: f64,
}

impl Default for InitialCondition {
    fn default() -> Self {
        Self {
            amplitude: 0.4,
            width_fraction: 0.1,
            kappa_offset: true,
            theta_min: 0.1,
        }
    }
}

impl InitialCondition {
    /// Builds the initial state. The species offset is reduced, never the
    /// profile, when the full `κ` would push `max n` above `1 - θ_min`.
    pub fn build(&self, grid: Grid, params: &ModelParams) -> Result<State, SolverError> {
        let law = PressureLaw::new(params.kappa)?;
        let (a, b) = grid.bounds();
        let mid = 0.5 * (a + b);
        let w = self.width_fraction * grid.length();
        let bump = grid.sample(|x| self.amplitude * (-((x - mid) / w).powi(2)).exp());
        let c_inf = params.kinetics.c_inf;
        let (species_offset, c_offset) = if self.kappa_offset {
            let peak = bump.iter().cloned().fold(0.0, f64::max);
            let room = 0.5 * (1.0 - self.theta_min - peak);
            (params.kappa.min(room.max(0.0)), params.kappa)
        } else {
            (0.0, 0.0)
        };
        let n_l = bump.iter().map(|v| v + species_offset).collect();
        let n_d = vec![species_offset; grid.cells()];
        let c = vec![c_inf + c_offset; grid.cells()];
        Ok(State::new(grid, law, c_inf, 0.0, n_l, n_d, c)?)
    }
}

/// Full description of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub grid: GridSpec,
    pub model: ModelParams,
    pub mode: Mode,
    pub t_end: f64,
    /// Number of equal output intervals; snapshots are taken at their ends and at 0.
    pub snapshots: usize,
    pub dt: DtControl,
    /// Upper bound on `dt max|v| / h`.
    pub cfl: f64,
    pub newton: NewtonSettings,
    pub initial: InitialCondition,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            model: ModelParams::default(),
            mode: Mode::Degenerate,
            t_end: 0.5,
            snapshots: 50,
            dt: DtControl::default(),
            cfl: 0.4,
            newton: NewtonSettings::default(),
            initial: InitialCondition::default(),
        }
    }
}

fn invalid(field: &'static str, reason: &'static str) -> SolverError {
    SolverError::Config { field, reason }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.grid.build()?;
        self.model.validate()?;
        if self.mode == Mode::Regularized && !(self.model.eps > 0.0 && self.model.eps < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(invalid("t_end", "must be finite and >= 0"));
        }
        if self.snapshots == 0 {
            return Err(invalid("snapshots", "must be >= 1"));
        }
        match self.dt {
            DtControl::Fixed { dt } if !(dt > 0.0) => return Err(invalid("dt", "must be > 0")),
            DtControl::Adaptive { initial, max } => {
                if !(initial > 0.0) {
                    return Err(invalid("dt_initial", "must be > 0"));
                }
                if !(max >= initial) {
                    return Err(invalid("dt_max", "must be >= dt_initial"));
                }
            }
            _ => {}
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(invalid("cfl", "must lie in (0, 1]"));
        }
        if !(self.newton.tol > 0.0) {
            return Err(invalid("newton_tol", "must be > 0"));
        }
        if self.newton.max_iter == 0 {
            return Err(invalid("newton_max_iter", "must be >= 1"));
        }
        let ic = &self.initial;
        if !(ic.amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be >= 0"));
        }
        if !(ic.width_fraction > 0.0) {
            return Err(invalid("width_fraction", "must be > 0"));
        }
        if !(ic.theta_min > 0.0 && ic.theta_min < 1.0) {
            return Err(invalid("theta_min", "must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn output_times(&self) -> Vec<f64> {
        if self.t_end == 0.0 {
            return vec![0.0];
        }
        (0..=self.snapshots)
            .map(|k| self.t_end * k as f64 / self.snapshots as f64)
            .collect()
    }

    pub fn initial_state(&self) -> Result<State, SolverError> {
        self.initial.build(self.grid.build()?, &self.model)
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        let mut c = self.clone();
        c.model.kappa = kappa;
        c
    }

    pub fn with_cells(&self, cells: usize) -> Self {
        let mut c = self.clone();
        c.grid.cells = cells;
        c
    }
}
