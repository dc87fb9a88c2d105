use super::dual::{check_pair, DualError};
use crate::solver::Trajectory;
use serde::Serialize;

/// Outcome of the pairwise L¹ rate inequality for `n` and `c`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateVerdict {
    pub kappa: f64,
    pub kappa_prime: f64,
    pub g_m: f64,
    pub f_m: f64,
    pub slack_n: f64,
    pub slack_c: f64,
    /// `min_t (rhs - lhs)` for `n`
    pub margin_n: f64,
    pub margin_c: f64,
    /// Time at which the margin is attained.
    pub worst_time_n: f64,
    pub worst_time_c: f64,
    pub passed_n: bool,
    pub passed_c: bool,
}

impl RateVerdict {
    pub fn passed(&self) -> bool {
        self.passed_n && self.passed_c
    }
}

/// Checks, at every snapshot `t`,
/// `sup_{s≤t} ‖n_κ - n_κ'‖ ≤ ‖n_κ(0) - n_κ'(0)‖ + G_m t sup_{s≤t} ‖n_κ‖ + slack`
/// and the same for `c` with `F_m`. The slack is
/// `slack_tol · (h + dt_max) · sup_t ‖q_κ‖_{L¹}` per quantity.
pub fn rate_check_pair(
    a: &Trajectory,
    b: &Trajectory,
    g_m: f64,
    f_m: f64,
    slack_tol: f64,
) -> Result<RateVerdict, DualError> {
    check_pair(a, b)?;
    let grid = *a.initial().grid();
    let scale = grid.h() + a.dt_max().max(b.dt_max());
    let na: Vec<f64> = a.snapshots.iter().map(|s| grid.norm_l1(s.n())).collect();
    let ca_sup = a.snapshots.iter().map(|s| grid.norm_l1(s.c())).fold(0.0, f64::max);
    let slack_n = slack_tol * scale * na.iter().cloned().fold(0.0, f64::max);
    let slack_c = slack_tol * scale * ca_sup;

    let dn0 = grid.distance_l1(a.initial().n(), b.initial().n());
    let dc0 = grid.distance_l1(a.initial().c(), b.initial().c());
    let (mut sup_dn, mut sup_dc, mut sup_na) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut margin_n, mut margin_c) = (f64::INFINITY, f64::INFINITY);
    let (mut worst_time_n, mut worst_time_c) = (0.0, 0.0);
    for (k, (sa, sb)) in a.snapshots.iter().zip(&b.snapshots).enumerate() {
        let t = sa.t();
        sup_dn = sup_dn.max(grid.distance_l1(sa.n(), sb.n()));
        sup_dc = sup_dc.max(grid.distance_l1(sa.c(), sb.c()));
        sup_na = sup_na.max(na[k]);
        let mn = dn0 + g_m * t * sup_na + slack_n - sup_dn;
        let mc = dc0 + f_m * t * sup_na + slack_c - sup_dc;
        if mn < margin_n {
            margin_n = mn;
            worst_time_n = t;
        }
        if mc < margin_c {
            margin_c = mc;
            worst_time_c = t;
        }
    }
    Ok(RateVerdict {
        kappa: a.kappa,
        kappa_prime: b.kappa,
        g_m,
        f_m,
        slack_n,
        slack_c,
        margin_n,
        margin_c,
        worst_time_n,
        worst_time_c,
        passed_n: margin_n > 0.0,
        passed_c: margin_c > 0.0,
    })
}

/// `sup_t ‖u(t) - v(t)‖_{L¹}` for `n` and `c`.
pub fn sup_distances(a: &Trajectory, b: &Trajectory) -> Result<(f64, f64), DualError> {
    check_pair(a, b)?;
    let grid = *a.initial().grid();
    Ok(a.snapshots
        .iter()
        .zip(&b.snapshots)
        .fold((0.0_f64, 0.0_f64), |(dn, dc), (x, y)| {
            (
                dn.max(grid.distance_l1(x.n(), y.n())),
                dc.max(grid.distance_l1(x.c(), y.c())),
            )
        }))
}
