use super::{NewtonSettings, SolverError};
use crate::grid::operators::upwind_fluxes;
use crate::grid::{Grid, State};
use crate::linalg::solve_tridiagonal;
use crate::model::{Enthalpy, KineticFunctions, Regularization, SATURATION_CLAMP};
use log::{debug, warn};

/// Damping halvings tried before a Newton step is declared failed.
const MAX_DAMPING: usize = 30;

/// Cells whose transported density is below this are re-seeded instead of rescaled.
const RESCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub n: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Trial iterates rejected because they reached the saturation clamp.
    pub saturation_breaches: usize,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Residual `n - dt Δ_h H(n) - b` with no-flux walls, or `None` if an
/// iterate touches the singularity of `H`.
fn density_residual<E: Enthalpy>(n: &[f64], b: &[f64], inv: f64, transform: &E) -> Option<Vec<f64>> {
    if transform.is_singular() && n.iter().any(|&v| v >= SATURATION_CLAMP) {
        return None;
    }
    let h: Vec<f64> = n.iter().map(|&v| transform.value(v)).collect();
    let m = n.len();
    Some(
        (0..m)
            .map(|i| {
                let mut lap = 0.0;
                if i > 0 {
                    lap += h[i - 1] - h[i];
                }
                if i + 1 < m {
                    lap += h[i + 1] - h[i];
                }
                n[i] - inv * lap - b[i]
            })
            .collect(),
    )
}

/// Backward Euler for `∂t n = Δ H(n) + source` by damped Newton.
///
/// The first iterate is `n_old + dt source`. Every Newton correction has zero
/// sum (the Jacobian has unit column sums), so each iterate carries exactly the
/// mass of the right-hand side.
pub fn step_total_density<E: Enthalpy>(
    grid: &Grid,
    n_old: &[f64],
    dt: f64,
    source: &[f64],
    transform: &E,
    newton: &NewtonSettings,
) -> Result<NewtonOutcome, SolverError> {
    grid.check_len(n_old)?;
    grid.check_len(source)?;
    let m = grid.cells();
    let inv = dt / (grid.h() * grid.h());
    let b: Vec<f64> = n_old.iter().zip(source).map(|(n, s)| n + dt * s).collect();
    let mut n = b.clone();
    let mut saturation_breaches = 0;
    let Some(mut r) = density_residual(&n, &b, inv, transform) else {
        return Err(SolverError::NewtonDivergence {
            iterations: 0,
            residual: f64::INFINITY,
        });
    };
    let mut norm = inf_norm(&r);
    let mut iterations = 0;
    let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    while norm > newton.tol {
        if iterations == newton.max_iter {
            return Err(SolverError::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
        let d: Vec<f64> = n.iter().map(|&v| transform.derivative(v)).collect();
        for i in 0..m {
            let neighbours = (i > 0) as u8 + (i + 1 < m) as u8;
            diag[i] = 1.0 + inv * f64::from(neighbours) * d[i];
            lower[i] = if i > 0 { -inv * d[i - 1] } else { 0.0 };
            upper[i] = if i + 1 < m { -inv * d[i + 1] } else { 0.0 };
        }
        let delta = solve_tridiagonal(&lower, &diag, &upper, &r).ok_or(SolverError::LinearSolve)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_DAMPING {
            let trial: Vec<f64> = n.iter().zip(&delta).map(|(x, dx)| x - alpha * dx).collect();
            match density_residual(&trial, &b, inv, transform) {
                Some(rt) => {
                    let nt = inf_norm(&rt);
                    if nt < norm {
                        n = trial;
                        r = rt;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                None => saturation_breaches += 1,
            }
            alpha *= 0.5;
        }
        iterations += 1;
        if !accepted {
            return Err(SolverError::NewtonDivergence {
                iterations,
                residual: norm,
            });
        }
    }
    if saturation_breaches > 0 {
        warn!("{saturation_breaches} Newton trial iterates reached the saturation clamp");
    }
    Ok(NewtonOutcome {
        n,
        iterations,
        residual: norm,
        saturation_breaches,
    })
}

/// Face fluxes `-(H_j - H_{j-1}) / h` of the Kirchhoff form; walls carry none.
pub fn density_fluxes(grid: &Grid, h_values: &[f64]) -> Vec<f64> {
    let m = grid.cells();
    let mut out = vec![0.0; m + 1];
    for j in 1..m {
        out[j] = -(h_values[j] - h_values[j - 1]) / grid.h();
    }
    out
}

/// Upwind cell of face `j` for a flux of the given sign.
#[inline]
fn upwind(j: usize, flux: f64) -> usize {
    if flux > 0.0 {
        j - 1
    } else {
        j
    }
}

/// Face velocity that transports the density `n` with exactly the given
/// upwind fluxes: `F_j / n_up`. Faces with an empty upwind cell get zero.
pub fn kirchhoff_face_velocity(n: &[f64], fluxes: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; fluxes.len()];
    for j in 1..n.len() {
        let up = n[upwind(j, fluxes[j])];
        if up > 0.0 {
            v[j] = fluxes[j] / up;
        }
    }
    v
}

fn cfl_number(grid: &Grid, velocity: &[f64], dt: f64) -> f64 {
    dt * inf_norm(velocity) / grid.h()
}

fn apply_fluxes(grid: &Grid, s: &[f64], flux: &[f64], reaction: &[f64], dt: f64) -> Vec<f64> {
    let k = dt / grid.h();
    (0..s.len())
        .map(|i| s[i] - k * (flux[i + 1] - flux[i]) + dt * reaction[i])
        .collect()
}

/// Explicit upwind transport of both species with the face velocity, plus
/// explicit reactions. Rejects the step when `dt max|v| / h > cfl`.
#[allow(clippy::too_many_arguments)]
pub fn step_species(
    grid: &Grid,
    n_l: &[f64],
    n_d: &[f64],
    velocity: &[f64],
    dt: f64,
    reaction_l: &[f64],
    reaction_d: &[f64],
    cfl: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    for v in [n_l, n_d, reaction_l, reaction_d] {
        grid.check_len(v)?;
    }
    if velocity.len() != grid.faces() {
        return Err(crate::grid::GridError::Length {
            expected: grid.faces(),
            got: velocity.len(),
        }
        .into());
    }
    let cfl_number = cfl_number(grid, velocity, dt);
    if cfl_number > cfl {
        return Err(SolverError::CflViolation { cfl_number, limit: cfl });
    }
    let fl = upwind_fluxes(n_l, velocity);
    let fd = upwind_fluxes(n_d, velocity);
    Ok((
        apply_fluxes(grid, n_l, &fl, reaction_l, dt),
        apply_fluxes(grid, n_d, &fd, reaction_d, dt),
    ))
}

/// Backward Euler for `∂t c = d Δc - f(c) n_l` with Dirichlet `c_∞` and the
/// consumption linearized as `(f(c_old) / c_old) n_l c_new`.
pub fn step_nutrient(
    grid: &Grid,
    c: &[f64],
    n_l: &[f64],
    dt: f64,
    kinetics: &KineticFunctions,
) -> Result<Vec<f64>, SolverError> {
    grid.check_len(c)?;
    grid.check_len(n_l)?;
    let m = grid.cells();
    let k = dt * kinetics.diffusion / (grid.h() * grid.h());
    let g = kinetics.c_inf;
    let mut lower = vec![-k; m];
    let mut upper = vec![-k; m];
    let mut diag = vec![0.0; m];
    let mut rhs = c.to_vec();
    lower[0] = 0.0;
    upper[m - 1] = 0.0;
    for i in 0..m {
        let uptake = dt * kinetics.consumption.slope(c[i]) * n_l[i].max(0.0);
        let wall = i == 0 || i == m - 1;
        diag[i] = 1.0 + if wall { 3.0 } else { 2.0 } * k + uptake;
        if wall {
            rhs[i] += 2.0 * k * g;
        }
    }
    solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or(SolverError::LinearSolve)
}

/// Reaction increments averaged between the current state and an explicit
/// Euler predictor (nutrient frozen).
#[derive(Debug, Clone, PartialEq)]
pub struct HeunReactions {
    pub live: Vec<f64>,
    pub dead: Vec<f64>,
    /// `live + dead`, the total-density source.
    pub total: Vec<f64>,
    /// `R_total` at the current state.
    pub total_start: Vec<f64>,
    /// `R_total` at the predictor.
    pub total_end: Vec<f64>,
}

pub fn heun_reactions(kinetics: &KineticFunctions, n_l: &[f64], n_d: &[f64], c: &[f64], dt: f64) -> HeunReactions {
    let m = n_l.len();
    let mut out = HeunReactions {
        live: Vec::with_capacity(m),
        dead: Vec::with_capacity(m),
        total: Vec::with_capacity(m),
        total_start: Vec::with_capacity(m),
        total_end: Vec::with_capacity(m),
    };
    for i in 0..m {
        let r0 = kinetics.reactions(n_l[i], n_d[i], c[i]);
        let r1 = kinetics.reactions(n_l[i] + dt * r0.live, n_d[i] + dt * r0.dead, c[i]);
        let live = 0.5 * (r0.live + r1.live);
        let dead = 0.5 * (r0.dead + r1.dead);
        out.live.push(live);
        out.dead.push(dead);
        out.total.push(live + dead);
        out.total_start.push(r0.total);
        out.total_end.push(r1.total);
    }
    out
}

/// Shared inputs of one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub kinetics: &'a KineticFunctions,
    pub newton: NewtonSettings,
    pub cfl: f64,
}

/// An accepted step and its bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: State,
    pub newton_iterations: usize,
    pub newton_residual: f64,
    pub saturation_breaches: usize,
    pub cfl_number: f64,
    /// Largest face velocity `max|v|`, used for the next step proposal.
    pub max_velocity: f64,
    pub rescale_min: f64,
    pub rescale_max: f64,
    /// `∫ R_total` at the start state and at the predictor.
    pub source_mass_start: f64,
    pub source_mass_end: f64,
    /// `dt ∫ source`, the mass injected by this step.
    pub source_integral: f64,
}

/// Per-cell projection of the species onto `n_new`. Returns the extreme
/// factors over cells above [`RESCALE_FLOOR`].
fn rescale(n_new: &[f64], n_l: &mut [f64], n_d: &mut [f64], dt: f64) -> Result<(f64, f64), SolverError> {
    let band = 10.0 * dt;
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    for i in 0..n_new.len() {
        let s = n_l[i] + n_d[i];
        if s > RESCALE_FLOOR {
            let factor = n_new[i] / s;
            if (factor - 1.0).abs() > band {
                return Err(SolverError::RescaleOutOfBand { cell: i, factor, dt });
            }
            lo = lo.min(factor);
            hi = hi.max(factor);
            n_l[i] *= factor;
            n_d[i] *= factor;
        } else if s > 0.0 {
            let factor = n_new[i].max(0.0) / s;
            n_l[i] *= factor;
            n_d[i] *= factor;
        } else {
            n_l[i] = n_new[i].max(0.0);
            n_d[i] = 0.0;
        }
    }
    Ok((lo, hi))
}

struct Common {
    reactions: HeunReactions,
    newton: NewtonOutcome,
    fluxes: Vec<f64>,
    velocity: Vec<f64>,
}

fn density_phase<E: Enthalpy>(state: &State, ctx: &StepContext, dt: f64, transform: &E) -> Result<Common, SolverError> {
    let grid = state.grid();
    let reactions = heun_reactions(ctx.kinetics, state.n_l(), state.n_d(), state.c(), dt);
    let newton = step_total_density(grid, state.n(), dt, &reactions.total, transform, &ctx.newton)?;
    let h_new: Vec<f64> = newton.n.iter().map(|&v| transform.value(v)).collect();
    let fluxes = density_fluxes(grid, &h_new);
    let velocity = kirchhoff_face_velocity(state.n(), &fluxes);
    Ok(Common {
        reactions,
        newton,
        fluxes,
        velocity,
    })
}

fn finish(
    state: &State,
    ctx: &StepContext,
    dt: f64,
    common: Common,
    mut n_l: Vec<f64>,
    mut n_d: Vec<f64>,
) -> Result<StepOutcome, SolverError> {
    let grid = state.grid();
    let (rescale_min, rescale_max) = rescale(&common.newton.n, &mut n_l, &mut n_d, dt)?;
    let c = step_nutrient(grid, state.c(), &n_l, dt, ctx.kinetics)?;
    let next = State::new(*grid, state.law(), state.c_inf(), state.t() + dt, n_l, n_d, c)?;
    let max_velocity = inf_norm(&common.velocity);
    debug!(
        "t = {:.6e}, dt = {dt:.3e}, newton = {}, rescale = [{rescale_min}, {rescale_max}]",
        next.t(),
        common.newton.iterations
    );
    Ok(StepOutcome {
        state: next,
        newton_iterations: common.newton.iterations,
        newton_residual: common.newton.residual,
        saturation_breaches: common.newton.saturation_breaches,
        cfl_number: dt * max_velocity / grid.h(),
        max_velocity,
        rescale_min,
        rescale_max,
        source_mass_start: grid.integral(&common.reactions.total_start),
        source_mass_end: grid.integral(&common.reactions.total_end),
        source_integral: dt * grid.integral(&common.reactions.total),
    })
}

/// One split step of the κ-system.
///
/// Species ride the face velocity that reproduces the implicit density
/// fluxes, so the rescale factor only absorbs the Newton residual.
pub fn step_kappa(state: &State, ctx: &StepContext, dt: f64) -> Result<StepOutcome, SolverError> {
    let law = state.law();
    let common = density_phase(state, ctx, dt, &law)?;
    let (n_l, n_d) = step_species(
        state.grid(),
        state.n_l(),
        state.n_d(),
        &common.velocity,
        dt,
        &common.reactions.live,
        &common.reactions.dead,
        ctx.cfl,
    )?;
    finish(state, ctx, dt, common, n_l, n_d)
}

/// One split step of the ε-regularized system.
///
/// The total flux `-∇_h H_ε(n)` is shared between the species in proportion
/// to `χ_{n_l,ε}` and `χ_{n_d,ε}` at the upwind cell.
pub fn step_regularized(
    state: &State,
    reg: &Regularization,
    ctx: &StepContext,
    dt: f64,
) -> Result<StepOutcome, SolverError> {
    let grid = state.grid();
    let common = density_phase(state, ctx, dt, reg)?;
    let cfl_number = cfl_number(grid, &common.velocity, dt);
    if cfl_number > ctx.cfl {
        return Err(SolverError::CflViolation {
            cfl_number,
            limit: ctx.cfl,
        });
    }
    let (n_old, l_old, d_old) = (state.n(), state.n_l(), state.n_d());
    let mut fl = vec![0.0; grid.faces()];
    let mut fd = vec![0.0; grid.faces()];
    for j in 1..grid.cells() {
        let f = common.fluxes[j];
        let up = upwind(j, f);
        let wl = reg.chi_partial(l_old[up], n_old[up]);
        let wd = reg.chi_partial(d_old[up], n_old[up]);
        fl[j] = f * wl / (wl + wd);
        fd[j] = f * wd / (wl + wd);
    }
    let n_l = apply_fluxes(grid, l_old, &fl, &common.reactions.live, dt);
    let n_d = apply_fluxes(grid, d_old, &fd, &common.reactions.dead, dt);
    finish(state, ctx, dt, common, n_l, n_d)
}
