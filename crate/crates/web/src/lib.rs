//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string; failures come back as `{"error": "..."}`.

use serde::Serialize;
use tumorlim::limit::{kappa_sweep, SweepOptions};
use tumorlim::model::{enthalpy_eps, PressureLaw};
use tumorlim::solver::{run, Mode, SimConfig};
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Failure {
    error: String,
}

fn to_json<T: Serialize, E: std::fmt::Display>(r: Result<T, E>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v),
        Err(e) => serde_json::to_string(&Failure { error: e.to_string() }),
    }
    .expect("plain data serializes")
}

#[derive(Serialize)]
struct Curves {
    n: Vec<f64>,
    p: Vec<f64>,
    h: Vec<f64>,
    h_eps: Vec<f64>,
}

fn curves(kappa: f64, eps: f64, samples: usize) -> Result<Curves, String> {
    let law = PressureLaw::new(kappa).map_err(|e| e.to_string())?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err("eps must lie in (0, 1)".to_string());
    }
    let m = samples.max(2);
    let n: Vec<f64> = (0..m).map(|k| 0.99 * k as f64 / (m - 1) as f64).collect();
    Ok(Curves {
        p: n.iter().map(|&v| law.pressure_clamped(v)).collect(),
        h: n.iter().map(|&v| law.enthalpy_clamped(v)).collect(),
        h_eps: n.iter().map(|&v| enthalpy_eps(v, eps, kappa)).collect(),
        n,
    })
}

/// `p_κ`, `H_κ` and the regularized `H_ε` on `samples` points of `[0, 0.99]`.
#[wasm_bindgen]
pub fn pressure_law_curves(kappa: f64, eps: f64, samples: usize) -> String {
    to_json(curves(kappa, eps, samples))
}

#[derive(Serialize)]
struct Profiles {
    x: Vec<f64>,
    times: Vec<f64>,
    n: Vec<Vec<f64>>,
    n_l: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    p: Vec<Vec<f64>>,
    max_n: f64,
    mass_defect: f64,
    steps: usize,
}

/// One run of the default problem; `eps > 0` selects the regularized system.
#[wasm_bindgen]
pub fn simulate(kappa: f64, eps: f64, cells: usize, t_end: f64, snapshots: usize) -> String {
    let mut cfg = SimConfig::default().with_kappa(kappa).with_cells(cells);
    cfg.t_end = t_end;
    cfg.snapshots = snapshots;
    if eps > 0.0 {
        cfg.mode = Mode::Regularized;
        cfg.model.eps = eps;
    }
    to_json(run(&cfg).map(|t| {
        let each = |f: fn(&tumorlim::State) -> &[f64]| t.snapshots.iter().map(|s| f(s).to_vec()).collect();
        Profiles {
            x: t.initial().grid().centers(),
            times: t.times(),
            n: each(|s| s.n()),
            n_l: each(|s| s.n_l()),
            c: each(|s| s.c()),
            p: each(|s| s.p()),
            max_n: t.max_n(),
            mass_defect: t.mass_defect(),
            steps: t.steps.len(),
        }
    }))
}

#[derive(Serialize)]
struct Distances {
    kappas: Vec<f64>,
    proxy_distances: Vec<f64>,
    proxy_monotone: bool,
    rate_passed: Vec<bool>,
    margins: Vec<f64>,
}

/// κ-sweep on the default problem: L¹ distances to the smallest-κ run and
/// the pairwise rate verdicts.
#[wasm_bindgen]
pub fn kappa_sweep_distances(kappas: &[f64], cells: usize, t_end: f64) -> String {
    let mut base = SimConfig::default().with_cells(cells);
    base.t_end = t_end;
    base.snapshots = 20;
    to_json(kappa_sweep(&base, kappas, &SweepOptions::default()).map(|r| {
        let s = r.summary;
        Distances {
            kappas: s.params,
            proxy_distances: s.proxy_distances,
            proxy_monotone: s.proxy_monotone,
            rate_passed: s.rate_checks.iter().map(|v| v.passed()).collect(),
            margins: s.rate_checks.iter().map(|v| v.margin_n.min(v.margin_c)).collect(),
        }
    }))
}
