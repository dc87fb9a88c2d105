//! The auxiliary parabolic problem `∂t φ = (λ + ε) Δφ` behind the L¹ rate.

use crate::grid::{Grid, State};
use crate::linalg::solve_tridiagonal;
use crate::model::{KineticFunctions, PressureLaw, SATURATION_CLAMP};
use crate::solver::Trajectory;
use serde::Serialize;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualError {
    #[error("lambda[{cell}] = {value} is negative")]
    NegativeLambda { cell: usize, value: f64 },
    #[error("density {value} outside [0, 1) in lambda")]
    Domain { value: f64 },
    #[error("mismatched discretizations: {0}")]
    Mismatch(&'static str),
    #[error("singular dual system")]
    LinearSolve,
}

const GL_NODES: usize = 16;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
fn gauss_legendre() -> &'static [(f64, f64); GL_NODES] {
    static RULE: OnceLock<[(f64, f64); GL_NODES]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_NODES;
        let mut rule = [(0.0, 0.0); GL_NODES];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            rule[i] = (0.5 * (1.0 - x), 0.5 * w);
        }
        rule
    })
}

fn check_density(v: f64) -> Result<(), DualError> {
    if !(0.0..SATURATION_CLAMP).contains(&v) {
        return Err(DualError::Domain { value: v });
    }
    Ok(())
}

/// Mean of `H'` over `[lo, hi]`. Panels are halved until each half-length is at
/// most its distance to the pole at 1, which keeps 16 nodes at roundoff level.
fn segment_mean(lo: f64, hi: f64, law: PressureLaw, rule: &[(f64, f64); GL_NODES], depth: u32) -> f64 {
    let width = hi - lo;
    if depth > 0 && 0.5 * width > 1.0 - hi {
        let mid = lo + 0.5 * width;
        return 0.5 * (segment_mean(lo, mid, law, rule, depth - 1) + segment_mean(mid, hi, law, rule, depth - 1));
    }
    rule.iter()
        .map(|&(xi, w)| w * law.enthalpy_derivative(lo + xi * width))
        .sum()
}

/// `λ = ∫₀¹ H'(ξ a + (1 - ξ) b) dξ` per cell by composite 16-point Gauss–Legendre.
pub fn lambda_coefficient(n_a: &[f64], n_b: &[f64], law: PressureLaw) -> Result<Vec<f64>, DualError> {
    if n_a.len() != n_b.len() {
        return Err(DualError::Mismatch("field lengths"));
    }
    let rule = gauss_legendre();
    n_a.iter()
        .zip(n_b)
        .map(|(&a, &b)| {
            // scheme noise just below zero
            let (a, b) = (a.max(0.0), b.max(0.0));
            check_density(a)?;
            check_density(b)?;
            Ok(segment_mean(a.min(b), a.max(b), law, rule, 30))
        })
        .collect()
}

/// Difference quotient `(H(b) - H(a)) / (b - a)`, or `H'(a)` when `a = b`.
pub fn lambda_difference_quotient(a: f64, b: f64, law: PressureLaw) -> f64 {
    if a == b {
        law.enthalpy_derivative(a)
    } else {
        (law.enthalpy_clamped(b) - law.enthalpy_clamped(a)) / (b - a)
    }
}

/// `h`-weighted gradient energy with Dirichlet-zero walls; wall
/// faces carry weight `h/2` so that summation by parts is exact.
fn grad_energy(grid: &Grid, phi: &[f64]) -> f64 {
    let h = grid.h();
    let m = phi.len();
    let mut s = 0.0;
    for j in 1..m {
        let g = (phi[j] - phi[j - 1]) / h;
        s += h * g * g;
    }
    let (g0, gm) = (2.0 * phi[0] / h, 2.0 * phi[m - 1] / h);
    s + 0.5 * h * (g0 * g0 + gm * gm)
}

fn dirichlet_laplacian(grid: &Grid, phi: &[f64]) -> Vec<f64> {
    let h2 = grid.h() * grid.h();
    let m = phi.len();
    (0..m)
        .map(|i| {
            let left = if i > 0 { phi[i - 1] } else { -phi[0] };
            let right = if i + 1 < m { phi[i + 1] } else { -phi[m - 1] };
            (left - 2.0 * phi[i] + right) / h2
        })
        .collect()
}

/// `‖φ‖²_{W^{1,2}} = ‖φ‖²_{L²} + ‖∇φ‖²_{L²}`.
pub fn w12_norm_sq(grid: &Grid, phi: &[f64]) -> f64 {
    let l2 = grid.norm_l2(phi);
    l2 * l2 + grad_energy(grid, phi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub eps: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    pub phi0_sup: f64,
    /// `max_t ‖φ(t)‖_∞ - ‖φ₀‖_∞`
    pub max_principle_excess: f64,
    pub max_principle_ok: bool,
    /// `max_t (‖φ(t)‖²_{W12} + ε ∫₀ᵗ ‖Δφ‖²) - ‖φ₀‖²_{W12}`
    pub energy_excess: f64,
    pub energy_ok: bool,
    /// Largest `C` for which the energy inequality holds at every time.
    pub best_constant: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

pub const MAX_PRINCIPLE_TOL: f64 = 1e-12;

/// Backward Euler for `∂t φ = (λ + ε) Δ_h φ` with zero Dirichlet walls.
///
/// `lambdas[k]` is used on `(times[k], times[k+1]]`, split into `substeps`.
pub fn dual_solve(
    grid: &Grid,
    times: &[f64],
    lambdas: &[Vec<f64>],
    eps: f64,
    phi0: &[f64],
    substeps: usize,
    energy_tol: f64,
) -> Result<DualSolution, DualError> {
    if lambdas.len() + 1 < times.len() {
        return Err(DualError::Mismatch("lambda series shorter than time grid"));
    }
    let (mut lmin, mut lmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for l in lambdas {
        if l.len() != grid.cells() {
            return Err(DualError::Mismatch("lambda length"));
        }
        for (cell, &value) in l.iter().enumerate() {
            if value < 0.0 {
                return Err(DualError::NegativeLambda { cell, value });
            }
            lmin = lmin.min(value);
            lmax = lmax.max(value);
        }
    }
    let m = grid.cells();
    let h2 = grid.h() * grid.h();
    let sup0 = grid.norm_linf(phi0);
    let e0 = w12_norm_sq(grid, phi0);
    let mut phi = phi0.to_vec();
    let mut snapshots = vec![phi.clone()];
    let mut lap_integral = 0.0;
    let (mut max_excess, mut energy_excess) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut best_constant = f64::INFINITY;
    for k in 1..times.len() {
        let dt = (times[k] - times[k - 1]) / substeps.max(1) as f64;
        let a: Vec<f64> = lambdas[k - 1].iter().map(|l| l + eps).collect();
        for _ in 0..substeps.max(1) {
            let mut lower = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut diag = vec![0.0; m];
            for i in 0..m {
                let r = dt * a[i] / h2;
                let wall = i == 0 || i == m - 1;
                diag[i] = 1.0 + if wall { 3.0 } else { 2.0 } * r;
                if i > 0 {
                    lower[i] = -r;
                }
                if i + 1 < m {
                    upper[i] = -r;
                }
            }
            phi = solve_tridiagonal(&lower, &diag, &upper, &phi).ok_or(DualError::LinearSolve)?;
            let lap = dirichlet_laplacian(grid, &phi);
            let l2 = grid.norm_l2(&lap);
            lap_integral += dt * l2 * l2;
        }
        let e = w12_norm_sq(grid, &phi);
        max_excess = max_excess.max(grid.norm_linf(&phi) - sup0);
        energy_excess = energy_excess.max(e + eps * lap_integral - e0);
        if lap_integral > 0.0 {
            best_constant = best_constant.min((e0 - e) / (eps * lap_integral));
        }
        snapshots.push(phi.clone());
    }
    if times.len() < 2 {
        max_excess = 0.0;
        energy_excess = 0.0;
    }
    Ok(DualSolution {
        eps,
        times: times.to_vec(),
        snapshots,
        phi0_sup: sup0,
        max_principle_excess: max_excess,
        max_principle_ok: max_excess <= MAX_PRINCIPLE_TOL,
        energy_excess,
        energy_ok: energy_excess <= energy_tol,
        best_constant,
        lambda_min: lmin,
        lambda_max: lmax,
    })
}

/// Smooth datum vanishing to fourth order at both walls.
pub fn default_phi0(grid: &Grid) -> Vec<f64> {
    let (a, _) = grid.bounds();
    let l = grid.length();
    grid.sample(|x| (std::f64::consts::PI * (x - a) / l).sin().powi(4))
}

/// λ at every snapshot of a trajectory pair.
pub fn lambda_series(a: &Trajectory, b: &Trajectory, law: PressureLaw) -> Result<Vec<Vec<f64>>, DualError> {
    check_pair(a, b)?;
    a.snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(sa, sb)| lambda_coefficient(sa.n(), sb.n(), law))
        .collect()
}

pub(crate) fn check_pair(a: &Trajectory, b: &Trajectory) -> Result<(), DualError> {
    if a.initial().grid() != b.initial().grid() {
        return Err(DualError::Mismatch("grids differ"));
    }
    if a.snapshots.len() != b.snapshots.len() || a.snapshots.iter().zip(&b.snapshots).any(|(x, y)| x.t() != y.t()) {
        return Err(DualError::Mismatch("snapshot times differ"));
    }
    Ok(())
}

/// Terms of `‖W(t)‖ ≤ ‖W(0)‖ + ∫₀ᵗ ‖R‖` for `W = n_κ - n_κ'`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityAudit {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub times: Vec<f64>,
    /// `‖W(t)‖_{L¹}`
    pub w: Vec<f64>,
    /// `‖Z(t)‖_{L¹}` for `Z = c_κ - c_κ'`
    pub z: Vec<f64>,
    /// `‖W(0)‖ + ∫₀ᵗ ‖R‖`
    pub rhs: Vec<f64>,
    /// `rhs - ‖W(t)‖`
    pub gap: Vec<f64>,
    pub min_gap: f64,
    /// `∫₀ᵗ ‖Δ_h(H_κ(n_κ') - H_κ'(n_κ'))‖_{L¹}`, the part of `ΔH_κ(n_κ) - ΔH_κ'(n_κ')`
    /// not of the form `Δ(λ W)`.
    pub law_mismatch: Vec<f64>,
}

fn reaction_difference(kinetics: &KineticFunctions, a: &State, b: &State) -> Vec<f64> {
    (0..a.n().len())
        .map(|i| {
            let ra = kinetics.reactions(a.n_l()[i], a.n_d()[i], a.c()[i]).total;
            let rb = kinetics.reactions(b.n_l()[i], b.n_d()[i], b.c()[i]).total;
            ra - rb
        })
        .collect()
}

fn neumann_laplacian_l1(grid: &Grid, v: &[f64]) -> f64 {
    let h2 = grid.h() * grid.h();
    let m = v.len();
    let lap: Vec<f64> = (0..m)
        .map(|i| {
            let mut s = 0.0;
            if i > 0 {
                s += v[i - 1] - v[i];
            }
            if i + 1 < m {
                s += v[i + 1] - v[i];
            }
            s / h2
        })
        .collect();
    grid.norm_l1(&lap)
}

pub fn duality_rate_audit(
    a: &Trajectory,
    b: &Trajectory,
    kinetics: &KineticFunctions,
) -> Result<DualityAudit, DualError> {
    check_pair(a, b)?;
    let grid = *a.initial().grid();
    let times = a.times();
    let (la, lb) = (a.initial().law(), b.initial().law());
    let w: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| grid.distance_l1(x.n(), y.n()))
        .collect();
    let z: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| grid.distance_l1(x.c(), y.c()))
        .collect();
    let r: Vec<f64> = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|(x, y)| grid.norm_l1(&reaction_difference(kinetics, x, y)))
        .collect();
    let mm: Vec<f64> = b
        .snapshots
        .iter()
        .map(|y| {
            let d: Vec<f64> = y
                .n()
                .iter()
                .map(|&n| la.enthalpy_clamped(n) - lb.enthalpy_clamped(n))
                .collect();
            neumann_laplacian_l1(&grid, &d)
        })
        .collect();
    let mut rhs = vec![w[0]];
    let mut law_mismatch = vec![0.0];
    let (mut acc_r, mut acc_m) = (0.0, 0.0);
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        acc_r += 0.5 * dt * (r[k] + r[k - 1]);
        acc_m += 0.5 * dt * (mm[k] + mm[k - 1]);
        rhs.push(w[0] + acc_r);
        law_mismatch.push(acc_m);
    }
    let gap: Vec<f64> = rhs.iter().zip(&w).map(|(r, w)| r - w).collect();
    let min_gap = gap.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(DualityAudit {
        kappa: a.kappa,
        kappa_prime: b.kappa,
        times,
        w,
        z,
        rhs,
        gap,
        min_gap,
        law_mismatch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre();
        let wsum: f64 = rule.iter().map(|r| r.1).sum();
        assert!((wsum - 1.0).abs() < 1e-14);
        for p in 0..31 {
            let q: f64 = rule.iter().map(|&(x, w)| w * x.powi(p)).sum();
            assert!((q - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn lambda_on_equal_fields_is_derivative() {
        let law = PressureLaw::new(0.2).unwrap();
        let n = [0.0, 0.1, 0.45, 0.8];
        let l = lambda_coefficient(&n, &n, law).unwrap();
        for (v, &x) in l.iter().zip(&n) {
            assert!((v - law.enthalpy_derivative(x)).abs() < 1e-14);
            assert!(*v >= 0.0);
        }
        assert!(lambda_coefficient(&[1.2], &[0.1], law).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_matches_difference_quotient(a in 0.0f64..0.99, b in 0.0f64..0.99, kappa in 0.01f64..1.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let law = PressureLaw::new(kappa).unwrap();
            let q = lambda_coefficient(&[a], &[b], law).unwrap()[0];
            let dq = lambda_difference_quotient(a, b, law);
            prop_assert!((q - dq).abs() < 1e-10 * dq.max(1.0), "{q} vs {dq}");
            prop_assert!(q >= 0.0);
        }
    }

    #[test]
    fn dual_trivial_cases() {
        let g = Grid::new(40, 0.0, 1.0).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| 0.01 * k as f64).collect();
        let zeros = vec![vec![0.0; 40]; 10];
        let s = dual_solve(&g, &times, &zeros, 0.1, &[0.0; 40], 5, 1e-12).unwrap();
        assert!(s.snapshots.iter().all(|p| p.iter().all(|&v| v == 0.0)));

        let phi0 = default_phi0(&g);
        let s = dual_solve(&g, &times, &zeros, 0.1, &phi0, 5, 1e-12).unwrap();
        let sups: Vec<f64> = s.snapshots.iter().map(|p| g.norm_linf(p)).collect();
        assert!(sups.windows(2).all(|w| w[1] < w[0]));
        assert!(s.max_principle_ok && s.energy_ok);

        let mut bad = zeros.clone();
        bad[3][7] = -1e-3;
        assert!(matches!(
            dual_solve(&g, &times, &bad, 0.1, &phi0, 5, 1e-12),
            Err(DualError::NegativeLambda { cell: 7, .. })
        ));
    }

    #[test]
    fn dual_estimates_with_rough_lambda() {
        let g = Grid::new(60, 0.0, 1.0).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| 0.005 * k as f64).collect();
        let lambdas: Vec<Vec<f64>> = (0..20)
            .map(|k| g.sample(|x| 1.0 + (10.0 * x + k as f64).sin()))
            .collect();
        let phi0 = g.sample(|x| (x * (1.0 - x) * 4.0).powi(3) * (7.0 * x).cos());
        let s = dual_solve(&g, &times, &lambdas, 1e-2, &phi0, 4, 1e-12).unwrap();
        assert!(s.max_principle_ok, "{}", s.max_principle_excess);
        assert!(s.energy_ok, "{}", s.energy_excess);
        assert!(s.best_constant >= 1.0);
    }
}
