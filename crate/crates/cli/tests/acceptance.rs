//! The twelve acceptance criteria, one line each. Exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;
use tumorlim::diagnostics::Diagnostics;
use tumorlim::limit::{eps_sweep, kappa_sweep, SweepKind, SweepResult};
use tumorlim::model::PressureLaw;
use tumorlim::solver::{run, Trajectory};
use tumorlim_cli::Config;

const KAPPAS: [f64; 5] = [0.5, 0.2, 0.1, 0.05, 0.02];
const EPS: [f64; 3] = [0.1, 0.05, 0.025];

struct Fixture {
    config: Config,
    kappa: SweepResult,
    eps: SweepResult,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let config = Config::default();
        assert_eq!(config.sweep.kappas, KAPPAS);
        assert_eq!(config.sweep.eps, EPS);
        let base = config.sim_config();
        let opts = config.sweep_options();
        let kappa = kappa_sweep(&base, &KAPPAS, &opts).expect("default kappa sweep");
        let eps = eps_sweep(&base, config.sweep.eps_kappa, &EPS, &opts).expect("default eps sweep");
        Fixture { config, kappa, eps }
    })
}

/// Every trajectory of both sweeps, with its diagnostics.
fn all_runs() -> Vec<(&'static Trajectory, &'static Diagnostics)> {
    let f = fixture();
    f.kappa
        .members
        .iter()
        .chain(&f.eps.members)
        .chain(f.eps.reference.iter())
        .map(|m| (&m.trajectory, &m.diagnostics))
        .collect()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn go(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let (m, lm, rm) = (0.5 * (a + b), 0.75 * a + 0.25 * b, 0.25 * a + 0.75 * b);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        // the relative floor stops refinement once roundoff dominates
        if depth == 0 || delta.abs() <= 15.0 * tol.max(1e-15 * (left + right).abs()) {
            return left + right + delta / 15.0;
        }
        go(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + go(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    go(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 40)
}

type Outcome = (bool, String);
type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn c01_enthalpy_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    for kappa in [0.01, 0.1, 1.0] {
        let law = PressureLaw::new(kappa).unwrap();
        for k in 0..=198 {
            let n = 0.99 * k as f64 / 198.0;
            let oracle = adaptive_simpson(&|s| kappa * s / (1.0 - s).powi(2), 0.0, n, 1e-13);
            worst = worst.max((law.enthalpy(n).unwrap() - oracle).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst <= 1e-8 && secs < 1.0,
        format!("max |H - quad| = {worst:.2e} (tol 1e-8), {secs:.3}s (limit 1s)"),
    )
}

fn c02_segregation_identity() -> Outcome {
    let mut worst = 0.0_f64;
    let mut snapshots = 0;
    for (_, d) in all_runs() {
        snapshots += d.residuals.segregation_identity.len();
        worst = d.residuals.segregation_identity.iter().fold(worst, |w, &v| w.max(v));
    }
    (
        worst <= 1e-13,
        format!("max defect {worst:.2e} over {snapshots} snapshots (tol 1e-13)"),
    )
}

fn c03_barrier() -> Outcome {
    let f = fixture();
    let max_n = f
        .kappa
        .members
        .iter()
        .map(|m| m.diagnostics.summary.max_n)
        .fold(0.0, f64::max);
    let rho = 1.0 - max_n;
    (
        rho >= 1e-3,
        format!("max n = {max_n:.6} across kappa {KAPPAS:?}, rho = {rho:.4} (min 1e-3)"),
    )
}

fn c04_positivity_and_nutrient() -> Outcome {
    let mut min_comp = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    for (_, d) in all_runs() {
        min_comp = min_comp.min(d.summary.min_component);
        excess = excess.max(d.summary.max_c - d.summary.c_max);
    }
    (
        min_comp >= -1e-12 && excess <= 1e-10,
        format!("min component {min_comp:.3e} (>= -1e-12), max c - c_max = {excess:.3e} (<= 1e-10)"),
    )
}

fn c05_mass_accounting() -> Outcome {
    let worst = all_runs()
        .iter()
        .map(|(_, d)| d.summary.mass_defect.abs())
        .fold(0.0, f64::max);
    (worst <= 1e-8, format!("max |mass defect| = {worst:.2e} (tol 1e-8)"))
}

fn c06_convergence_rate() -> Outcome {
    let s = &fixture().kappa.summary;
    let worst = s
        .rate_checks
        .iter()
        .map(|v| (v.margin_n / v.slack_n).min(v.margin_c / v.slack_c))
        .fold(f64::INFINITY, f64::min);
    let pairs = s.rate_checks.len();
    (
        pairs == KAPPAS.len() - 1 && s.rate_checks_passed() && s.proxy_monotone,
        format!(
            "{pairs} adjacent pairs, all pass: {}, min margin/slack {worst:.3}; proxy distances {:?} monotone: {}",
            s.rate_checks_passed(),
            s.proxy_distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            s.proxy_monotone
        ),
    )
}

fn c07_complementarity() -> Outcome {
    let f = fixture();
    let at = |kappa: f64| {
        let m = f
            .kappa
            .summary
            .members
            .iter()
            .find(|m| m.kappa == kappa)
            .expect("member");
        assert!((m.final_time - 0.5).abs() < 1e-12);
        m.final_complementarity
    };
    let (small, large) = (at(0.02), at(0.5));
    (
        small <= 0.25 * large,
        format!(
            "residual(0.02) = {small:.3e}, residual(0.5) = {large:.3e}, ratio {:.3e} (max 0.25)",
            small / large
        ),
    )
}

fn c08_regularization() -> Outcome {
    let s = &fixture().eps.summary;
    (
        s.reference_monotone && s.reference_distances.len() == EPS.len(),
        format!(
            "eps {EPS:?}: L1 gaps {:?}",
            s.reference_distances
                .iter()
                .map(|d| format!("{d:.3e}"))
                .collect::<Vec<_>>()
        ),
    )
}

fn c09_dual_estimates() -> Outcome {
    let s = &fixture().kappa.summary;
    let mp = s.dual_checks.iter().map(|d| d.max_principle_excess).fold(0.0, f64::max);
    let en = s
        .dual_checks
        .iter()
        .map(|d| d.energy_excess)
        .fold(f64::NEG_INFINITY, f64::max);
    let best = s.dual_checks.iter().map(|d| d.best_constant).fold(0.0, f64::max);
    let ok = s.dual_checks.len() == KAPPAS.len() - 1 && s.dual_checks.iter().all(|d| d.max_principle_ok && d.energy_ok);
    (
        ok,
        format!("{} pairs: max-principle excess {mp:.2e} (tol 1e-12), energy excess with C=1 {en:.2e}, largest best C {best:.3e}", s.dual_checks.len()),
    )
}

fn c10_energy_boundedness() -> Outcome {
    let f = fixture();
    let members = &f.kappa.members;
    let finite = members.iter().all(|m| m.diagnostics.summary.energy_finite);
    let base = &members[0].diagnostics.summary;
    assert_eq!(base.kappa, 0.5);
    let mut worst = ("", 0.0_f64);
    for m in &members[1..] {
        for ((name, v), (_, b)) in m.diagnostics.summary.energy_maxima.iter().zip(&base.energy_maxima) {
            let ratio = if *b > 0.0 {
                v / b
            } else if *v == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio > worst.1 {
                worst = (name, ratio);
            }
        }
    }
    (
        finite && worst.1 <= 10.0,
        format!(
            "all finite: {finite}; worst ratio to kappa=0.5 baseline {:.3} in {} (max 10)",
            worst.1, worst.0
        ),
    )
}

fn restricted_distance(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    let g = *coarse.initial().grid();
    coarse
        .snapshots
        .iter()
        .zip(&fine.snapshots)
        .map(|(c, f)| {
            let r: Vec<f64> = f.n().chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect();
            g.distance_l1(c.n(), &r)
        })
        .fold(0.0, f64::max)
}

fn c11_self_convergence() -> Outcome {
    let base = Config::default().sim_config().with_kappa(0.1);
    let runs: Vec<Trajectory> = [100usize, 200, 400]
        .iter()
        .map(|&n| run(&base.with_cells(n)).expect("refinement run"))
        .collect();
    let e1 = restricted_distance(&runs[0], &runs[1]);
    let e2 = restricted_distance(&runs[1], &runs[2]);
    let order = (e1 / e2).log2();
    (
        order >= 0.8,
        format!("sup_t L1 gaps {e1:.3e} (100/200), {e2:.3e} (200/400), order {order:.3} (min 0.8)"),
    )
}

fn c12_determinism() -> Outcome {
    let config = Config::default();
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for d in &dirs {
        tumorlim_cli::simulate(&config, &d.path().join("sim")).unwrap();
        tumorlim_cli::sweep(&config, SweepKind::Kappa, &d.path().join("sweep")).unwrap();
    }
    let mut files = vec![
        "sim/trajectory.csv".to_string(),
        "sim/diagnostics.csv".into(),
        "sim/summary.json".into(),
    ];
    files.push("sweep/sweep_summary.json".into());
    for k in 0..KAPPAS.len() {
        for f in ["trajectory.csv", "diagnostics.csv", "summary.json"] {
            files.push(format!("sweep/member_{k:02}/{f}"));
        }
    }
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(dirs[0].path().join(f)).unwrap() != std::fs::read(dirs[1].path().join(f)).unwrap())
        .collect();
    (
        differing.is_empty(),
        format!("{} data files compared, differing: {differing:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("C01", "enthalpy identity", c01_enthalpy_identity),
        ("C02", "segregation identity", c02_segregation_identity),
        ("C03", "barrier", c03_barrier),
        ("C04", "positivity and nutrient barrier", c04_positivity_and_nutrient),
        ("C05", "mass accounting", c05_mass_accounting),
        ("C06", "convergence rate", c06_convergence_rate),
        ("C07", "complementarity decay", c07_complementarity),
        ("C08", "regularization convergence", c08_regularization),
        ("C09", "dual-problem estimates", c09_dual_estimates),
        ("C10", "energy boundedness", c10_energy_boundedness),
        ("C11", "self-convergence", c11_self_convergence),
        ("C12", "determinism", c12_determinism),
    ];
    let start = Instant::now();
    let _ = fixture();
    println!(
        "acceptance fixture ready in {:.2}s (slack_tol {})",
        start.elapsed().as_secs_f64(),
        fixture().config.sweep.slack_tol
    );
    let mut failed = 0;
    for (id, name, check) in criteria {
        let (passed, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!passed);
        println!("[{}] {id} {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} of 12 passed in {:.2}s",
        12 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
