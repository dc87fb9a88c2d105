//! Parameter sweeps in κ and ε, pairwise rate checks and the dual problem.

mod dual;
mod rate;

pub use dual::{
    default_phi0, dual_solve, duality_rate_audit, lambda_coefficient, lambda_difference_quotient, lambda_series,
    w12_norm_sq, DualError, DualSolution, DualityAudit, MAX_PRINCIPLE_TOL,
};
pub use rate::{rate_check_pair, sup_distances, RateVerdict};

use crate::diagnostics::{analyze, Diagnostics, RunDiagnostics};
use crate::grid::FaceAverage;
use crate::model::{chi_eps, PressureLaw};
use crate::solver::{run, Mode, RunError, SimConfig, Trajectory};
use log::info;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Kappa,
    Eps,
}

/// Which member of a pair supplies `H'` in λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaChoice {
    #[default]
    Larger,
    Smaller,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepOptions {
    /// Multiplier of `(h + dt_max) sup‖q‖_{L¹}` in the rate-check slack.
    pub slack_tol: f64,
    pub kappa_h: KappaChoice,
    pub dual_eps: f64,
    pub dual_substeps: usize,
    pub dual_energy_tol: f64,
    pub face_average: FaceAverage,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            slack_tol: 2.0,
            kappa_h: KappaChoice::Larger,
            dual_eps: 1e-2,
            dual_substeps: 10,
            dual_energy_tol: 1e-10,
            face_average: FaceAverage::Arithmetic,
        }
    }
}

/// One completed run of a sweep.
#[derive(Debug, Clone)]
pub struct Member {
    /// κ for κ-sweeps, ε for ε-sweeps.
    pub param: f64,
    pub config: SimConfig,
    pub trajectory: Trajectory,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberSummary {
    pub param: f64,
    pub mode: Mode,
    pub kappa: f64,
    pub eps: f64,
    pub final_time: f64,
    pub final_l1_n: f64,
    pub final_l1_c: f64,
    pub final_complementarity: f64,
    pub final_segregation: f64,
    pub run: RunDiagnostics,
}

impl MemberSummary {
    fn of(m: &Member) -> Self {
        let last = m.trajectory.last();
        let g = last.grid();
        let r = &m.diagnostics.residuals;
        Self {
            param: m.param,
            mode: m.trajectory.mode,
            kappa: m.trajectory.kappa,
            eps: m.trajectory.eps,
            final_time: last.t(),
            final_l1_n: g.norm_l1(last.n()),
            final_l1_c: g.norm_l1(last.c()),
            final_complementarity: *r.complementarity.last().expect("non-empty"),
            final_segregation: *r.segregation.last().expect("non-empty"),
            run: m.diagnostics.summary.clone(),
        }
    }
}

/// Dual-problem verdict on λ from one adjacent pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualVerdict {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub kappa_h: f64,
    pub eps: f64,
    pub max_principle_excess: f64,
    pub max_principle_ok: bool,
    pub energy_excess: f64,
    pub energy_ok: bool,
    pub best_constant: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub kind: SweepKind,
    /// Sorted by decreasing parameter.
    pub params: Vec<f64>,
    pub members: Vec<MemberSummary>,
    /// `sup_t ‖n_i - n_j‖_{L¹}`, symmetric.
    pub distances_n: Vec<Vec<f64>>,
    pub distances_c: Vec<Vec<f64>>,
    /// Distances of every member to the last (smallest-parameter) member.
    pub proxy_distances: Vec<f64>,
    /// Proxy distances strictly decrease toward the proxy.
    pub proxy_monotone: bool,
    /// κ-sweep only: adjacent-pair verdicts.
    pub rate_checks: Vec<RateVerdict>,
    pub duality: Vec<DualityAudit>,
    pub dual_checks: Vec<DualVerdict>,
    /// ε-sweep only: degenerate run at the same κ.
    pub reference: Option<MemberSummary>,
    /// ε-sweep only: `sup_t ‖n_ε - n_κ‖_{L¹}` per member.
    pub reference_distances: Vec<f64>,
    /// ε-sweep only: final-time `‖n_ε(T) - n_κ(T)‖_{L¹}` per member.
    pub reference_final_distances: Vec<f64>,
    pub reference_monotone: bool,
}

impl SweepSummary {
    pub fn rate_checks_passed(&self) -> bool {
        self.rate_checks.iter().all(RateVerdict::passed)
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub summary: SweepSummary,
    pub members: Vec<Member>,
    pub reference: Option<Member>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep needs at least one member")]
    Empty,
    #[error("{} of {} members failed; first: {param} ({error})", failed.len(), failed.len() + completed.len(), param = failed[0].0, error = failed[0].1)]
    Members {
        completed: Vec<Member>,
        failed: Vec<(f64, Box<RunError>)>,
    },
    #[error(transparent)]
    Dual(#[from] DualError),
}

fn run_member(param: f64, config: SimConfig, face: FaceAverage) -> Result<Member, (f64, Box<RunError>)> {
    let trajectory = run(&config).map_err(|e| (param, e))?;
    let diagnostics = analyze(&trajectory, &config.model.kinetics, face);
    Ok(Member {
        param,
        config,
        trajectory,
        diagnostics,
    })
}

fn run_all(jobs: Vec<(f64, SimConfig)>, face: FaceAverage) -> Result<Vec<Member>, SweepError> {
    #[cfg(feature = "parallel")]
    let results: Vec<_> = jobs.into_par_iter().map(|(p, c)| run_member(p, c, face)).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = jobs.into_iter().map(|(p, c)| run_member(p, c, face)).collect();
    let mut completed = Vec::new();
    let mut failed = Vec::new();
    for r in results {
        match r {
            Ok(m) => completed.push(m),
            Err(e) => failed.push(e),
        }
    }
    if failed.is_empty() {
        Ok(completed)
    } else {
        Err(SweepError::Members { completed, failed })
    }
}

fn sorted_desc(params: &[f64]) -> Vec<f64> {
    let mut p = params.to_vec();
    p.sort_by(|a, b| b.total_cmp(a));
    p
}

type Matrix = Vec<Vec<f64>>;

fn distance_matrices(members: &[&Trajectory]) -> Result<(Matrix, Matrix), DualError> {
    let m = members.len();
    let mut dn = vec![vec![0.0; m]; m];
    let mut dc = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let (a, b) = sup_distances(members[i], members[j])?;
            dn[i][j] = a;
            dn[j][i] = a;
            dc[i][j] = b;
            dc[j][i] = b;
        }
    }
    Ok((dn, dc))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Runs the degenerate system at every κ and checks each adjacent pair.
pub fn kappa_sweep(base: &SimConfig, kappas: &[f64], opts: &SweepOptions) -> Result<SweepResult, SweepError> {
    if kappas.is_empty() {
        return Err(SweepError::Empty);
    }
    let params = sorted_desc(kappas);
    info!("kappa sweep over {params:?}");
    let jobs = params
        .iter()
        .map(|&k| {
            let mut c = base.with_kappa(k);
            c.mode = Mode::Degenerate;
            (k, c)
        })
        .collect();
    let members = run_all(jobs, opts.face_average)?;
    let trajs: Vec<&Trajectory> = members.iter().map(|m| &m.trajectory).collect();
    let (distances_n, distances_c) = distance_matrices(&trajs)?;
    let last = members.len() - 1;
    let proxy_distances: Vec<f64> = (0..members.len()).map(|i| distances_n[i][last]).collect();

    let mut rate_checks = Vec::new();
    let mut duality = Vec::new();
    let mut dual_checks = Vec::new();
    for w in members.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let kin = &a.config.model.kinetics;
        let d = &a.diagnostics.summary;
        rate_checks.push(rate_check_pair(
            &a.trajectory,
            &b.trajectory,
            d.g_m,
            d.f_m,
            opts.slack_tol,
        )?);
        duality.push(duality_rate_audit(&a.trajectory, &b.trajectory, kin)?);
        dual_checks.push(dual_pair(&a.trajectory, &b.trajectory, opts)?);
    }
    let summary = SweepSummary {
        kind: SweepKind::Kappa,
        params,
        members: members.iter().map(MemberSummary::of).collect(),
        proxy_monotone: strictly_decreasing(&proxy_distances[..last]),
        proxy_distances,
        distances_n,
        distances_c,
        rate_checks,
        duality,
        dual_checks,
        reference: None,
        reference_distances: Vec::new(),
        reference_final_distances: Vec::new(),
        reference_monotone: true,
    };
    Ok(SweepResult {
        summary,
        members,
        reference: None,
    })
}

/// Solves the dual problem on λ built from the pair `(κ, κ')`.
pub fn dual_pair(a: &Trajectory, b: &Trajectory, opts: &SweepOptions) -> Result<DualVerdict, DualError> {
    let kappa_h = match opts.kappa_h {
        KappaChoice::Larger => a.kappa.max(b.kappa),
        KappaChoice::Smaller => a.kappa.min(b.kappa),
    };
    let law = PressureLaw::new(kappa_h).map_err(|_| DualError::Domain { value: kappa_h })?;
    let lambdas = lambda_series(a, b, law)?;
    let grid = *a.initial().grid();
    let s = dual_solve(
        &grid,
        &a.times(),
        &lambdas,
        opts.dual_eps,
        &default_phi0(&grid),
        opts.dual_substeps,
        opts.dual_energy_tol,
    )?;
    Ok(DualVerdict {
        kappa: a.kappa,
        kappa_prime: b.kappa,
        kappa_h,
        eps: s.eps,
        max_principle_excess: s.max_principle_excess,
        max_principle_ok: s.max_principle_ok,
        energy_excess: s.energy_excess,
        energy_ok: s.energy_ok,
        best_constant: s.best_constant,
        lambda_min: s.lambda_min,
        lambda_max: s.lambda_max,
    })
}

/// Runs the regularized system at fixed κ for every ε, plus the degenerate
/// reference at the same κ.
pub fn eps_sweep(base: &SimConfig, kappa: f64, eps: &[f64], opts: &SweepOptions) -> Result<SweepResult, SweepError> {
    if eps.is_empty() {
        return Err(SweepError::Empty);
    }
    let params = sorted_desc(eps);
    info!("eps sweep over {params:?} at kappa {kappa}");
    let mut reference_cfg = base.with_kappa(kappa);
    reference_cfg.mode = Mode::Degenerate;
    let mut jobs: Vec<(f64, SimConfig)> = vec![(0.0, reference_cfg)];
    for &e in &params {
        let mut c = base.with_kappa(kappa);
        c.mode = Mode::Regularized;
        c.model.eps = e;
        jobs.push((e, c));
    }
    let mut all = run_all(jobs, opts.face_average)?;
    let reference = all.remove(0);
    let members = all;
    let trajs: Vec<&Trajectory> = members.iter().map(|m| &m.trajectory).collect();
    let (distances_n, distances_c) = distance_matrices(&trajs)?;
    let last = members.len() - 1;
    let proxy_distances: Vec<f64> = (0..members.len()).map(|i| distances_n[i][last]).collect();
    let mut reference_distances = Vec::new();
    let mut reference_final_distances = Vec::new();
    for m in &members {
        reference_distances.push(sup_distances(&m.trajectory, &reference.trajectory)?.0);
        let (x, y) = (m.trajectory.last(), reference.trajectory.last());
        reference_final_distances.push(x.grid().distance_l1(x.n(), y.n()));
    }
    let summary = SweepSummary {
        kind: SweepKind::Eps,
        params,
        members: members.iter().map(MemberSummary::of).collect(),
        proxy_monotone: strictly_decreasing(&proxy_distances[..last]),
        proxy_distances,
        distances_n,
        distances_c,
        rate_checks: Vec::new(),
        duality: Vec::new(),
        dual_checks: Vec::new(),
        reference: Some(MemberSummary::of(&reference)),
        reference_monotone: strictly_decreasing(&reference_distances),
        reference_distances,
        reference_final_distances,
    };
    Ok(SweepResult {
        summary,
        members,
        reference: Some(reference),
    })
}

/// `max |χ_ε(n) - H'_κ(n)|` over `samples` points of `[0, 1 - δ]`.
pub fn chi_gap(eps: f64, kappa: f64, delta: f64, samples: usize) -> f64 {
    let law = PressureLaw::new(kappa).expect("kappa > 0");
    let top = 1.0 - delta;
    (0..samples)
        .map(|i| {
            let n = top * i as f64 / (samples - 1) as f64;
            (chi_eps(n, eps, kappa) - law.enthalpy_derivative(n)).abs()
        })
        .fold(0.0, f64::max)
}
