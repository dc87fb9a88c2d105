use super::steps::{step_kappa, step_regularized, StepContext, StepOutcome};
use super::{DtControl, Mode, SimConfig, SolverError, DT_GROWTH};
use crate::grid::State;
use crate::model::Regularization;
use log::{debug, info};
use serde::Serialize;
use std::fmt;

/// Bookkeeping of one accepted step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    /// Time at the end of the step.
    pub t: f64,
    pub dt: f64,
    /// Attempts rejected before this one was accepted.
    pub rejections: usize,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub saturation_breaches: usize,
    pub cfl_number: f64,
    pub rescale_min: f64,
    pub rescale_max: f64,
    pub mass: f64,
    pub max_n: f64,
    pub min_component: f64,
    pub max_c: f64,
    pub source_mass_start: f64,
    pub source_mass_end: f64,
    pub source_integral: f64,
}

impl StepRecord {
    fn new(out: &StepOutcome, dt: f64, rejections: usize) -> Self {
        let s = &out.state;
        Self {
            t: s.t(),
            dt,
            rejections,
            newton_iterations: out.newton_iterations,
            newton_residual: out.newton_residual,
            saturation_breaches: out.saturation_breaches,
            cfl_number: out.cfl_number,
            rescale_min: out.rescale_min,
            rescale_max: out.rescale_max,
            mass: s.mass(),
            max_n: s.max_n(),
            min_component: s.min_component(),
            max_c: s.max_c(),
            source_mass_start: out.source_mass_start,
            source_mass_end: out.source_mass_end,
            source_integral: out.source_integral,
        }
    }
}

/// Snapshots at the output times plus per-step records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub kappa: f64,
    pub eps: f64,
    pub snapshots: Vec<State>,
    pub steps: Vec<StepRecord>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(State::t).collect()
    }

    pub fn initial(&self) -> &State {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &State {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    pub fn h(&self) -> f64 {
        self.initial().grid().h()
    }

    /// Largest accepted step.
    pub fn dt_max(&self) -> f64 {
        self.steps.iter().fold(0.0, |m, s| m.max(s.dt))
    }

    pub fn source_integral(&self) -> f64 {
        self.steps.iter().map(|s| s.source_integral).sum()
    }

    /// `∫n(T) - ∫n(0) - Σ dt ∫ source`.
    pub fn mass_defect(&self) -> f64 {
        self.last().mass() - self.initial().mass() - self.source_integral()
    }

    /// Smallest component over the initial state and all accepted steps.
    pub fn min_component(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.min_component)
            .fold(self.initial().min_component(), f64::min)
    }

    pub fn max_c(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.max_c)
            .fold(self.initial().max_c(), f64::max)
    }

    pub fn max_n(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.max_n)
            .fold(self.initial().max_n(), f64::max)
    }

    pub fn rejections(&self) -> usize {
        self.steps.iter().map(|s| s.rejections).sum()
    }
}

/// A failed run with whatever was computed before the failure.
#[derive(Debug, Clone)]
pub struct RunError {
    pub error: SolverError,
    pub last_state: Option<State>,
    pub partial: Option<Trajectory>,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.last_state {
            Some(s) => write!(f, "{} (last accepted state at t = {})", self.error, s.t()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<SolverError> for RunError {
    fn from(error: SolverError) -> Self {
        Self {
            error,
            last_state: None,
            partial: None,
        }
    }
}

/// Integrates `config` to `t_end`, landing exactly on every output time.
pub fn run(config: &SimConfig) -> Result<Trajectory, Box<RunError>> {
    config.validate().map_err(RunError::from)?;
    let initial = config.initial_state().map_err(RunError::from)?;
    let reg = match config.mode {
        Mode::Regularized => Some(
            Regularization::new(config.model.kappa, config.model.eps)
                .map_err(|e| RunError::from(SolverError::from(e)))?,
        ),
        Mode::Degenerate => None,
    };
    let ctx = StepContext {
        kinetics: &config.model.kinetics,
        newton: config.newton,
        cfl: config.cfl,
    };
    let (mut dt, dt_cap) = match config.dt {
        DtControl::Fixed { dt } => (dt, dt),
        DtControl::Adaptive { initial, max } => (initial, max),
    };
    let dt_floor = 1e-12 * config.t_end;
    let mut traj = Trajectory {
        mode: config.mode,
        kappa: config.model.kappa,
        eps: config.model.eps,
        snapshots: vec![initial.clone()],
        steps: Vec::new(),
    };
    let mut state = initial;
    let h = state.grid().h();
    info!(
        "run: mode {:?}, kappa {}, cells {}, t_end {}",
        config.mode,
        config.model.kappa,
        state.grid().cells(),
        config.t_end
    );
    for &target in &config.output_times()[1..] {
        while state.t() < target {
            let remaining = target - state.t();
            let landing = remaining <= dt * (1.0 + 1e-9);
            let step = if landing { remaining } else { dt };
            let mut rejections = 0;
            let result = loop {
                let attempt = match &reg {
                    Some(r) => step_regularized(&state, r, &ctx, step_with(step, rejections)),
                    None => step_kappa(&state, &ctx, step_with(step, rejections)),
                };
                match attempt {
                    Ok(out) => break Ok(out),
                    Err(e) if e.is_retryable() => {
                        rejections += 1;
                        let next = step_with(step, rejections);
                        debug!("step rejected at t = {}: {e}; retrying with dt = {next:e}", state.t());
                        if next < dt_floor {
                            break Err(SolverError::DtUnderflow { t: state.t(), dt: next });
                        }
                    }
                    Err(e) => break Err(e),
                }
            };
            let out = match result {
                Ok(out) => out,
                Err(error) => {
                    return Err(Box::new(RunError {
                        error,
                        last_state: Some(state),
                        partial: Some(traj),
                    }))
                }
            };
            let taken = step_with(step, rejections);
            traj.steps.push(StepRecord::new(&out, taken, rejections));
            state = out.state;
            if landing && rejections == 0 {
                state = state.with_time(target);
            }
            if rejections > 0 {
                dt = taken;
            } else if !landing {
                dt = (dt * DT_GROWTH).min(dt_cap);
            }
            if out.max_velocity > 0.0 {
                dt = dt.min(0.9 * config.cfl * h / out.max_velocity);
            }
            dt = dt.min(dt_cap);
        }
        traj.snapshots.push(state.clone());
    }
    Ok(traj)
}

fn step_with(dt: f64, rejections: usize) -> f64 {
    dt * 0.5_f64.powi(rejections as i32)
}
