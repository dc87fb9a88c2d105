//! Estimates, residuals and functionals evaluated on trajectories.
//!
//! Time derivatives use differences between consecutive snapshots; time
//! integrals use the trapezoid rule on the snapshot times.

use crate::grid::{diffusion_flux_divergence, face_average, gradient_at_faces, FaceAverage, Grid, State};
use crate::model::{KineticFunctions, PressureLaw};
use crate::solver::Trajectory;
use serde::Serialize;

fn sq_integral(grid: &Grid, faces: &[f64]) -> f64 {
    grid.h() * faces.iter().map(|g| g * g).sum::<f64>()
}

fn running_max(values: &[f64]) -> Vec<f64> {
    let mut m = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            m = m.max(v);
            m
        })
        .collect()
}

/// Trapezoid cumulative integral of per-snapshot values.
fn cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(values.len());
    out.push(0.0);
    for k in 1..values.len() {
        acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

/// Cumulative `∫₀ᵗ ∫ (∂t q)²` from snapshot differences.
fn cumulative_rate(grid: &Grid, times: &[f64], series: &[&[f64]]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for k in 1..series.len() {
        let dt = times[k] - times[k - 1];
        if dt > 0.0 {
            let s: f64 = series[k]
                .iter()
                .zip(series[k - 1])
                .map(|(a, b)| ((a - b) / dt).powi(2))
                .sum();
            acc += dt * grid.h() * s;
        }
        out.push(acc);
    }
    out
}

/// Energy functionals along a trajectory, one entry per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    /// `∫₀ᵗ∫(∂t c)²`
    pub dt_c: Vec<f64>,
    /// `sup_{s≤t} ∫|∇c|²`
    pub sup_grad_c: Vec<f64>,
    pub dt_n_l: Vec<f64>,
    pub sup_grad_n_l: Vec<f64>,
    pub dt_n_d: Vec<f64>,
    pub sup_grad_n_d: Vec<f64>,
    /// `∫₀ᵗ∫(∂t H)²`
    pub dt_h: Vec<f64>,
    pub sup_grad_h: Vec<f64>,
    /// `∫ Φ_κ(n(t))`
    pub phi: Vec<f64>,
    /// `∫₀ᵗ∫|∇H|²`
    pub cum_grad_h: Vec<f64>,
    /// `∫₀ᵗ∫|∇p|²`
    pub cum_grad_p: Vec<f64>,
    /// `∫₀ᵗ∫ χ|∇n|²` with `χ = H'(n)` averaged onto faces.
    pub cum_chi_grad_n: Vec<f64>,
}

impl EnergyReport {
    pub const METRICS: [&'static str; 12] = [
        "dt_c",
        "sup_grad_c",
        "dt_n_l",
        "sup_grad_n_l",
        "dt_n_d",
        "sup_grad_n_d",
        "dt_h",
        "sup_grad_h",
        "phi",
        "cum_grad_h",
        "cum_grad_p",
        "cum_chi_grad_n",
    ];

    pub fn series(&self) -> [&[f64]; 12] {
        [
            &self.dt_c,
            &self.sup_grad_c,
            &self.dt_n_l,
            &self.sup_grad_n_l,
            &self.dt_n_d,
            &self.sup_grad_n_d,
            &self.dt_h,
            &self.sup_grad_h,
            &self.phi,
            &self.cum_grad_h,
            &self.cum_grad_p,
            &self.cum_chi_grad_n,
        ]
    }

    /// Maximum over time of every functional, in [`Self::METRICS`] order.
    pub fn maxima(&self) -> Vec<(&'static str, f64)> {
        Self::METRICS
            .iter()
            .zip(self.series())
            .map(|(&name, s)| (name, s.iter().cloned().fold(0.0, f64::max)))
            .collect()
    }

    pub fn all_finite(&self) -> bool {
        self.series()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite() && *v >= 0.0))
    }
}

pub fn energy_report(traj: &Trajectory, law: PressureLaw, face: FaceAverage) -> EnergyReport {
    let snaps = &traj.snapshots;
    let grid = *snaps[0].grid();
    let times = traj.times();
    let per = |f: &dyn Fn(&State) -> f64| snaps.iter().map(f).collect::<Vec<f64>>();

    let grad_c = per(&|s| sq_integral(&grid, &gradient_at_faces(&s.nutrient_field())));
    let grad_l = per(&|s| sq_integral(&grid, &gradient_at_faces(&s.field(s.n_l()))));
    let grad_d = per(&|s| sq_integral(&grid, &gradient_at_faces(&s.field(s.n_d()))));
    let h_of = |s: &State| -> Vec<f64> { s.n().iter().map(|&n| law.enthalpy_clamped(n)).collect() };
    let grad_h = per(&|s| sq_integral(&grid, &gradient_at_faces(&s.field(&h_of(s)))));
    let p_of = |s: &State| -> Vec<f64> { s.n().iter().map(|&n| law.pressure_clamped(n)).collect() };
    let grad_p = per(&|s| sq_integral(&grid, &gradient_at_faces(&s.field(&p_of(s)))));
    let phi = per(&|s| grid.integral(&s.n().iter().map(|&n| law.primitive_clamped(n)).collect::<Vec<_>>()));
    let chi_grad_n = per(&|s| {
        let chi: Vec<f64> = s
            .n()
            .iter()
            .map(|&n| law.enthalpy_derivative(n.clamp(0.0, crate::model::SATURATION_CLAMP)))
            .collect();
        let chi_f = face_average(&grid, &chi, face).expect("state length matches grid");
        let g = gradient_at_faces(&s.field(s.n()));
        grid.h() * chi_f.iter().zip(&g).map(|(k, g)| k * g * g).sum::<f64>()
    });

    let cs: Vec<&[f64]> = snaps.iter().map(|s| s.c()).collect();
    let ls: Vec<&[f64]> = snaps.iter().map(|s| s.n_l()).collect();
    let ds: Vec<&[f64]> = snaps.iter().map(|s| s.n_d()).collect();
    let hs: Vec<Vec<f64>> = snaps.iter().map(h_of).collect();
    let hr: Vec<&[f64]> = hs.iter().map(|v| v.as_slice()).collect();

    EnergyReport {
        dt_c: cumulative_rate(&grid, &times, &cs),
        sup_grad_c: running_max(&grad_c),
        dt_n_l: cumulative_rate(&grid, &times, &ls),
        sup_grad_n_l: running_max(&grad_l),
        dt_n_d: cumulative_rate(&grid, &times, &ds),
        sup_grad_n_d: running_max(&grad_d),
        dt_h: cumulative_rate(&grid, &times, &hr),
        sup_grad_h: running_max(&grad_h),
        phi,
        cum_grad_h: cumulative(&times, &grad_h),
        cum_grad_p: cumulative(&times, &grad_p),
        cum_chi_grad_n: cumulative(&times, &chi_grad_n),
        times,
    }
}

/// No-flux discrete Laplacian.
fn neumann_laplacian(state: &State, values: &[f64]) -> Vec<f64> {
    let ones = vec![1.0; state.grid().faces()];
    diffusion_flux_divergence(&ones, &state.field(values)).expect("unit coefficients are nonnegative")
}

/// `‖p² (Δ_h p + G(c) n_l - μ n_d)‖_{L¹}`.
pub fn complementarity_residual(state: &State, kinetics: &KineticFunctions) -> f64 {
    let p = state.p();
    let lap = neumann_laplacian(state, p);
    let grid = state.grid();
    let terms: Vec<f64> = (0..p.len())
        .map(|i| {
            let g = kinetics.growth.eval(state.c()[i].max(0.0));
            p[i] * p[i] * (lap[i] + g * state.n_l()[i] - kinetics.mu * state.n_d()[i])
        })
        .collect();
    grid.norm_l1(&terms)
}

/// `‖(1 - n) p‖_{L¹}`; equals `κ ‖n‖_{L¹}` under the pressure law.
pub fn segregation_residual(state: &State) -> f64 {
    let v: Vec<f64> = state.n().iter().zip(state.p()).map(|(n, p)| (1.0 - n) * p).collect();
    state.grid().norm_l1(&v)
}

/// Residual of `∂t p = (p²/κ + p) Δp + |∇p|² + (p + κ)²/κ (G n_l - μ n_d)`
/// per snapshot interval, with the spatial terms at the later snapshot.
pub fn pressure_equation_residual(traj: &Trajectory, kinetics: &KineticFunctions) -> Vec<f64> {
    let snaps = &traj.snapshots;
    let kappa = snaps[0].kappa();
    let mut out = Vec::with_capacity(snaps.len().saturating_sub(1));
    for w in snaps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t() - a.t();
        if !(dt > 0.0) {
            out.push(0.0);
            continue;
        }
        let p = b.p();
        let lap = neumann_laplacian(b, p);
        let grad = gradient_at_faces(&b.field(p));
        let r: Vec<f64> = (0..p.len())
            .map(|i| {
                let dtp = (p[i] - a.p()[i]) / dt;
                let g2 = 0.5 * (grad[i] * grad[i] + grad[i + 1] * grad[i + 1]);
                let src = kinetics.growth.eval(b.c()[i].max(0.0)) * b.n_l()[i] - kinetics.mu * b.n_d()[i];
                dtp - (p[i] * p[i] / kappa + p[i]) * lap[i] - g2 - (p[i] + kappa).powi(2) / kappa * src
            })
            .collect();
        out.push(b.grid().norm_l1(&r));
    }
    out
}

/// `(max n over all accepted steps, 1 - max n)`.
pub fn barrier_monitor(traj: &Trajectory) -> (f64, f64) {
    let m = traj.max_n();
    (m, 1.0 - m)
}

/// Space-time test function `φ(t, x) = a(t) b(x)` for the weak form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TestFunction {
    Zero,
    /// `sin²(π t/T) · ((x-a)(b-x))²` scaled to unit peak.
    Polynomial,
    /// `sin²(π t/T) · sin²(π (x-a)/L)^k · cos(2π j (x-a)/L)` with `(k, j)`.
    Trigonometric {
        power: i32,
        wave: i32,
    },
}

impl TestFunction {
    /// The default bank.
    pub fn bank() -> Vec<TestFunction> {
        vec![
            TestFunction::Polynomial,
            TestFunction::Trigonometric { power: 2, wave: 0 },
            TestFunction::Trigonometric { power: 2, wave: 1 },
            TestFunction::Trigonometric { power: 3, wave: 2 },
        ]
    }

    /// `(φ, ∂t φ, ∂x φ)` at `(t, x)` on `[0, t_end] × [a, b]`.
    fn eval(&self, t: f64, t_end: f64, x: f64, a: f64, b: f64) -> (f64, f64, f64) {
        use std::f64::consts::PI;
        let w = PI / t_end;
        let (ta, dta) = ((w * t).sin().powi(2), 2.0 * w * (w * t).sin() * (w * t).cos());
        let l = b - a;
        let (sx, dsx) = match *self {
            TestFunction::Zero => (0.0, 0.0),
            TestFunction::Polynomial => {
                let s = 16.0 / l.powi(4);
                let q = (x - a) * (b - x);
                let dq = b + a - 2.0 * x;
                (s * q * q, s * 2.0 * q * dq)
            }
            TestFunction::Trigonometric { power, wave } => {
                let k = PI / l;
                let y = x - a;
                let sn = (k * y).sin();
                let env = sn.powi(2 * power);
                let denv = 2.0 * power as f64 * sn.powi(2 * power - 1) * (k * y).cos() * k;
                let jw = 2.0 * k * wave as f64;
                let osc = (jw * y).cos();
                let dosc = -jw * (jw * y).sin();
                (env * osc, denv * osc + env * dosc)
            }
        };
        (ta * sx, dta * sx, ta * dsx)
    }
}

/// Largest weak-form defect of the `n_l` equation over `bank`:
/// `|∫∫ -n_l ∂tφ + n_l ∇p·∇φ - R₁ φ|`.
pub fn weak_form_check(traj: &Trajectory, kinetics: &KineticFunctions, bank: &[TestFunction]) -> f64 {
    let snaps = &traj.snapshots;
    if snaps.len() < 2 {
        return 0.0;
    }
    let grid = *snaps[0].grid();
    let (a, b) = grid.bounds();
    let times = traj.times();
    let t_end = *times.last().expect("non-empty");
    let h = grid.h();
    let mut worst: f64 = 0.0;
    for phi in bank {
        let density: Vec<f64> = snaps
            .iter()
            .map(|s| {
                let t = s.t();
                let nl = s.n_l();
                let mut acc = 0.0;
                for i in 0..grid.cells() {
                    let (f, ft, _) = phi.eval(t, t_end, grid.center(i), a, b);
                    let r1 = kinetics.reactions(nl[i], s.n_d()[i], s.c()[i]).live;
                    acc += -nl[i] * ft - r1 * f;
                }
                let grad_p = gradient_at_faces(&s.field(s.p()));
                for j in 1..grid.cells() {
                    let (_, _, fx) = phi.eval(t, t_end, grid.face(j), a, b);
                    acc += 0.5 * (nl[j - 1] + nl[j]) * grad_p[j] * fx;
                }
                h * acc
            })
            .collect();
        let total = *cumulative(&times, &density).last().expect("non-empty");
        worst = worst.max(total.abs());
    }
    worst
}

/// Residuals per snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    pub complementarity: Vec<f64>,
    pub segregation: Vec<f64>,
    /// `|segregation - κ ‖n‖_{L¹}|`
    pub segregation_identity: Vec<f64>,
    /// One entry per snapshot interval; the first snapshot carries 0.
    pub pressure_equation: Vec<f64>,
}

pub fn residual_report(traj: &Trajectory, kinetics: &KineticFunctions) -> ResidualReport {
    let snaps = &traj.snapshots;
    let seg: Vec<f64> = snaps.iter().map(segregation_residual).collect();
    let ident = snaps
        .iter()
        .zip(&seg)
        .map(|(s, r)| (r - s.kappa() * s.grid().norm_l1(s.n())).abs())
        .collect();
    let mut pressure = vec![0.0];
    pressure.extend(pressure_equation_residual(traj, kinetics));
    ResidualReport {
        times: traj.times(),
        complementarity: snaps.iter().map(|s| complementarity_residual(s, kinetics)).collect(),
        segregation: seg,
        segregation_identity: ident,
        pressure_equation: pressure,
    }
}

/// Scalar health of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunDiagnostics {
    pub kappa: f64,
    pub max_n: f64,
    pub rho: f64,
    pub min_component: f64,
    pub max_c: f64,
    pub c_max: f64,
    pub g_m: f64,
    pub f_m: f64,
    pub mass_defect: f64,
    pub source_integral: f64,
    pub segregation_identity_max: f64,
    pub weak_form_defect: f64,
    pub energy_maxima: Vec<(&'static str, f64)>,
    pub energy_finite: bool,
    pub rejected_steps: usize,
    pub accepted_steps: usize,
}

/// Every report of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub summary: RunDiagnostics,
    pub energy: EnergyReport,
    pub residuals: ResidualReport,
}

impl Diagnostics {
    /// Long-format `(time, metric, value)` rows.
    pub fn long_rows(&self) -> Vec<(f64, &'static str, f64)> {
        let mut rows = Vec::new();
        for (k, &t) in self.energy.times.iter().enumerate() {
            for (name, s) in EnergyReport::METRICS.iter().zip(self.energy.series()) {
                rows.push((t, *name, s[k]));
            }
            let r = &self.residuals;
            rows.push((t, "complementarity", r.complementarity[k]));
            rows.push((t, "segregation", r.segregation[k]));
            rows.push((t, "segregation_identity", r.segregation_identity[k]));
            rows.push((t, "pressure_equation", r.pressure_equation[k]));
        }
        rows
    }
}

pub fn analyze(traj: &Trajectory, kinetics: &KineticFunctions, face: FaceAverage) -> Diagnostics {
    let init = traj.initial();
    let law = init.law();
    let derived = kinetics.derived_constants(init.c());
    let energy = energy_report(traj, law, face);
    let residuals = residual_report(traj, kinetics);
    let (max_n, rho) = barrier_monitor(traj);
    let summary = RunDiagnostics {
        kappa: law.kappa(),
        max_n,
        rho,
        min_component: traj.min_component(),
        max_c: traj.max_c(),
        c_max: derived.c_max,
        g_m: derived.g_m,
        f_m: derived.f_m,
        mass_defect: traj.mass_defect(),
        source_integral: traj.source_integral(),
        segregation_identity_max: residuals.segregation_identity.iter().cloned().fold(0.0, f64::max),
        weak_form_defect: weak_form_check(traj, kinetics, &TestFunction::bank()),
        energy_maxima: energy.maxima(),
        energy_finite: energy.all_finite(),
        rejected_steps: traj.rejections(),
        accepted_steps: traj.steps.len(),
    };
    Diagnostics {
        summary,
        energy,
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Consumption, Death, Growth};
    use crate::solver::{run, DtControl, SimConfig};

    fn quiet() -> KineticFunctions {
        KineticFunctions {
            growth: Growth::Linear { rate: 0.0 },
            death: Death::Constant { rate: 0.0 },
            consumption: Consumption::Linear { rate: 0.0 },
            mu: 0.0,
            ..KineticFunctions::default()
        }
    }

    fn flat_trajectory() -> Trajectory {
        let g = Grid::new(16, 0.0, 1.0).unwrap();
        let law = PressureLaw::new(0.3).unwrap();
        let s = |t| State::new(g, law, 1.0, t, vec![0.4; 16], vec![0.0; 16], vec![1.0; 16]).unwrap();
        Trajectory {
            mode: crate::solver::Mode::Degenerate,
            kappa: 0.3,
            eps: 0.05,
            snapshots: vec![s(0.0), s(0.5), s(1.0)],
            steps: vec![],
        }
    }

    #[test]
    fn steady_trajectory_has_no_rates() {
        let t = flat_trajectory();
        let e = energy_report(&t, PressureLaw::new(0.3).unwrap(), FaceAverage::Arithmetic);
        for s in [&e.dt_c, &e.dt_n_l, &e.dt_n_d, &e.dt_h, &e.cum_grad_h, &e.cum_grad_p] {
            assert!(s.iter().all(|&v| v == 0.0));
        }
        assert!(e.all_finite());
        assert!(pressure_equation_residual(&t, &quiet())
            .iter()
            .all(|&v| v.abs() < 1e-12));
        assert_eq!(weak_form_check(&t, &quiet(), &TestFunction::bank()), 0.0);
        assert_eq!(
            weak_form_check(&t, &KineticFunctions::default(), &[TestFunction::Zero]),
            0.0
        );
        let (m, rho) = barrier_monitor(&t);
        assert!((m - 0.4).abs() < 1e-15 && (rho - 0.6).abs() < 1e-15);
    }

    #[test]
    fn residual_identities() {
        let g = Grid::new(32, 0.0, 1.0).unwrap();
        let law = PressureLaw::new(0.07).unwrap();
        let nl = g.sample(|x| 0.3 + 0.2 * (5.0 * x).sin());
        let nd = g.sample(|x| 0.1 * x);
        let s = State::new(g, law, 1.0, 0.0, nl, nd, vec![1.0; 32]).unwrap();
        let seg = segregation_residual(&s);
        assert!((seg - 0.07 * g.norm_l1(s.n())).abs() < 1e-13);

        let zero = State::new(g, law, 1.0, 0.0, vec![0.0; 32], vec![0.0; 32], vec![1.0; 32]).unwrap();
        assert_eq!(complementarity_residual(&zero, &KineticFunctions::default()), 0.0);
        assert_eq!(segregation_residual(&zero), 0.0);
    }

    #[test]
    fn sup_series_are_nondecreasing() {
        let cfg = SimConfig {
            t_end: 0.1,
            snapshots: 10,
            ..SimConfig::default().with_cells(60)
        };
        let traj = run(&cfg).unwrap();
        let e = energy_report(&traj, traj.initial().law(), FaceAverage::Arithmetic);
        for s in [
            &e.sup_grad_c,
            &e.sup_grad_n_l,
            &e.sup_grad_n_d,
            &e.sup_grad_h,
            &e.cum_grad_p,
        ] {
            assert!(s.windows(2).all(|w| w[1] >= w[0]));
        }
        let (full, _) = barrier_monitor(&traj);
        let mut prefix = traj.clone();
        prefix.snapshots.truncate(4);
        prefix.steps.retain(|s| s.t <= prefix.snapshots[3].t());
        assert!(barrier_monitor(&prefix).0 <= full);
    }

    #[test]
    fn weak_form_defect_shrinks_under_refinement() {
        let defect = |cells: usize, snaps: usize, dt: f64| {
            let cfg = SimConfig {
                t_end: 0.2,
                snapshots: snaps,
                dt: DtControl::Fixed { dt },
                ..SimConfig::default().with_cells(cells)
            };
            let k = cfg.model.kinetics;
            weak_form_check(&run(&cfg).unwrap(), &k, &TestFunction::bank())
        };
        let a = defect(50, 20, 4e-3);
        let b = defect(100, 40, 2e-3);
        let c = defect(200, 80, 1e-3);
        assert!(b < a && c < b, "{a} {b} {c}");
        let order = (b / c).log2();
        assert!(order >= 0.8, "observed order {order}");
    }
}
