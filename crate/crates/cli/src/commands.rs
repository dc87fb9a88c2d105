//! `simulate`, `sweep` and `verify`.

use crate::config::{ChecksSection, Config};
use crate::output::*;
use anyhow::{bail, Context, Result};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;
use tumorlim::diagnostics::{analyze, Diagnostics, RunDiagnostics};
use tumorlim::limit::{eps_sweep, kappa_sweep, Member, SweepError, SweepKind, SweepResult, SweepSummary};
use tumorlim::solver::{run, Mode, SimConfig, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    fn new(name: &str, passed: bool, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub kappa: f64,
    pub eps: f64,
    pub cells: usize,
    pub a: f64,
    pub b: f64,
    pub t_end: f64,
    /// Sweep kind and its parameter list, for sweeps only.
    pub sweep_kind: Option<String>,
    pub sweep_params: Vec<f64>,
}

impl Parameters {
    fn of(cfg: &SimConfig) -> Self {
        Self {
            kappa: cfg.model.kappa,
            eps: cfg.model.eps,
            cells: cfg.grid.cells,
            a: cfg.grid.a,
            b: cfg.grid.b,
            t_end: cfg.t_end,
            sweep_kind: None,
            sweep_params: Vec::new(),
        }
    }

    fn h(&self) -> f64 {
        (self.b - self.a) / self.cells as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedMember {
    pub param: f64,
    pub error: String,
}

/// What a command wrote. Wall times live here and nowhere else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub status: Status,
    pub config_hash: String,
    pub mode: String,
    pub parameters: Parameters,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub outputs: Vec<OutputFile>,
    /// Member subdirectories of a sweep.
    pub members: Vec<String>,
    pub failed_members: Vec<FailedMember>,
    pub checks: Vec<CheckResult>,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.status == Status::Ok && self.checks.iter().all(|c| c.passed)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(MANIFEST_FILE), json(self)).context("writing manifest")
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn mode_name(mode: Mode) -> String {
    match mode {
        Mode::Degenerate => "degenerate",
        Mode::Regularized => "regularized",
    }
    .to_string()
}

struct Clock {
    started_unix: f64,
    start: Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            started_unix: unix_now(),
            start: Instant::now(),
        }
    }

    fn stamp(&self, m: &mut RunManifest) {
        m.started_unix = self.started_unix;
        m.finished_unix = unix_now();
        m.wall_seconds = self.start.elapsed().as_secs_f64();
    }
}

fn blank_manifest(kind: &str, hash: &str, cfg: &SimConfig) -> RunManifest {
    RunManifest {
        kind: kind.to_string(),
        status: Status::Ok,
        config_hash: hash.to_string(),
        mode: mode_name(cfg.mode),
        parameters: Parameters::of(cfg),
        started_unix: 0.0,
        finished_unix: 0.0,
        wall_seconds: 0.0,
        outputs: Vec::new(),
        members: Vec::new(),
        failed_members: Vec::new(),
        checks: Vec::new(),
        error: None,
    }
}

pub fn run_checks(d: &RunDiagnostics, checks: &ChecksSection) -> Vec<CheckResult> {
    let mut out = Vec::new();
    if checks.segregation {
        let v = d.segregation_identity_max;
        out.push(CheckResult::new(
            "segregation",
            v <= checks.segregation_tol,
            v,
            checks.segregation_tol,
        ));
    }
    if checks.positivity {
        let v = d.min_component;
        out.push(CheckResult::new(
            "positivity",
            v >= -checks.positivity_tol,
            v,
            checks.positivity_tol,
        ));
    }
    if checks.nutrient_barrier {
        let v = d.max_c - d.c_max;
        out.push(CheckResult::new(
            "nutrient_barrier",
            v <= checks.nutrient_tol,
            v,
            checks.nutrient_tol,
        ));
    }
    if checks.mass_balance {
        let v = d.mass_defect.abs();
        out.push(CheckResult::new(
            "mass_balance",
            v <= checks.mass_tol,
            v,
            checks.mass_tol,
        ));
    }
    if checks.barrier {
        out.push(CheckResult::new(
            "barrier",
            d.rho >= checks.rho_min,
            d.rho,
            checks.rho_min,
        ));
    }
    if checks.energy_finite {
        let v = if d.energy_finite { 0.0 } else { 1.0 };
        out.push(CheckResult::new("energy_finite", d.energy_finite, v, 0.0));
    }
    out
}

#[derive(Serialize)]
struct RunSummaryFile<'a> {
    config_hash: &'a str,
    mode: String,
    kappa: f64,
    eps: f64,
    snapshots: usize,
    /// How the species share the total-density update.
    species_split: &'static str,
    rescale_min: f64,
    rescale_max: f64,
    checks: &'a [CheckResult],
    diagnostics: &'a RunDiagnostics,
}

/// Writes the data files of one trajectory and returns its manifest
/// (not yet stamped or written).
fn write_run(
    dir: &Path,
    hash: &str,
    cfg: &SimConfig,
    traj: &Trajectory,
    diag: &Diagnostics,
    checks: &ChecksSection,
) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut m = blank_manifest("simulate", hash, cfg);
    m.checks = run_checks(&diag.summary, checks);
    let summary = RunSummaryFile {
        config_hash: hash,
        mode: mode_name(cfg.mode),
        kappa: cfg.model.kappa,
        eps: cfg.model.eps,
        snapshots: traj.snapshots.len(),
        species_split: "rescale_projection",
        rescale_min: traj.steps.iter().map(|s| s.rescale_min).fold(1.0, f64::min),
        rescale_max: traj.steps.iter().map(|s| s.rescale_max).fold(1.0, f64::max),
        checks: &m.checks,
        diagnostics: &diag.summary,
    };
    m.outputs = vec![
        write_file(dir, TRAJECTORY_FILE, &trajectory_csv(traj))?,
        write_file(dir, DIAGNOSTICS_FILE, &diagnostics_csv(diag))?,
        write_file(dir, SUMMARY_FILE, &json(&summary))?,
    ];
    Ok(m)
}

/// Runs one trajectory and writes trajectory, diagnostics, summary and
/// manifest into `out`. A solver failure dumps the last accepted state.
pub fn simulate(config: &Config, out: &Path) -> Result<RunManifest> {
    let clock = Clock::start();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let hash = config.hash();
    let cfg = config.sim_config();
    info!(
        "simulate kappa={} mode={:?} cells={}",
        cfg.model.kappa, cfg.mode, cfg.grid.cells
    );
    let config_file = write_file(out, CONFIG_FILE, &config.to_toml())?;
    match run(&cfg) {
        Ok(traj) => {
            let diag = analyze(&traj, &cfg.model.kinetics, config.face_average());
            let mut m = write_run(out, &hash, &cfg, &traj, &diag, &config.checks)?;
            m.outputs.insert(0, config_file);
            clock.stamp(&mut m);
            m.write(out)?;
            for c in m.checks.iter().filter(|c| !c.passed) {
                warn!("check {} failed: {} (tolerance {})", c.name, c.value, c.tolerance);
            }
            Ok(m)
        }
        Err(e) => {
            let mut m = blank_manifest("simulate", &hash, &cfg);
            m.status = Status::Failed;
            m.error = Some(e.to_string());
            m.outputs.push(config_file);
            if let Some(s) = &e.last_state {
                m.outputs.push(write_file(out, LAST_STATE_FILE, &state_csv(s))?);
            }
            clock.stamp(&mut m);
            m.write(out)?;
            Err(anyhow::Error::new(*e).context(format!("simulation failed; see {}", out.display())))
        }
    }
}

fn member_dir(k: usize) -> String {
    format!("member_{k:02}")
}

#[derive(Serialize)]
struct SweepFile<'a> {
    config_hash: &'a str,
    checks: &'a [CheckResult],
    summary: &'a SweepSummary,
}

pub fn sweep_checks(s: &SweepSummary, config: &Config) -> Vec<CheckResult> {
    let mut out = Vec::new();
    match s.kind {
        SweepKind::Kappa => {
            let worst = s
                .rate_checks
                .iter()
                .map(|v| v.margin_n.min(v.margin_c))
                .fold(f64::INFINITY, f64::min);
            let worst = if worst.is_finite() { worst } else { 0.0 };
            out.push(CheckResult::new("rate_checks", s.rate_checks_passed(), worst, 0.0));
            out.push(CheckResult::new("proxy_monotone", s.proxy_monotone, 0.0, 0.0));
            let mp = s.dual_checks.iter().map(|d| d.max_principle_excess).fold(0.0, f64::max);
            out.push(CheckResult::new(
                "dual_max_principle",
                s.dual_checks.iter().all(|d| d.max_principle_ok),
                mp,
                tumorlim::limit::MAX_PRINCIPLE_TOL,
            ));
            let en = s.dual_checks.iter().map(|d| d.energy_excess).fold(0.0, f64::max);
            out.push(CheckResult::new(
                "dual_energy",
                s.dual_checks.iter().all(|d| d.energy_ok),
                en,
                config.sweep.dual_energy_tol,
            ));
        }
        SweepKind::Eps => {
            out.push(CheckResult::new("reference_monotone", s.reference_monotone, 0.0, 0.0));
        }
    }
    if config.checks.barrier {
        let rho = s.members.iter().map(|m| m.run.rho).fold(f64::INFINITY, f64::min);
        out.push(CheckResult::new(
            "sweep_barrier",
            rho >= config.checks.rho_min,
            rho,
            config.checks.rho_min,
        ));
    }
    out
}

fn write_members(
    out: &Path,
    hash: &str,
    members: &[Member],
    checks: &ChecksSection,
    manifest: &mut RunManifest,
) -> Result<()> {
    for (k, m) in members.iter().enumerate() {
        let name = member_dir(k);
        let dir = out.join(&name);
        let mut mm = write_run(&dir, hash, &m.config, &m.trajectory, &m.diagnostics, checks)?;
        mm.parameters.sweep_params = vec![m.param];
        mm.stamp_now();
        mm.write(&dir)?;
        if !mm.all_passed() {
            manifest
                .checks
                .push(CheckResult::new(&format!("{name}.checks"), false, m.param, 0.0));
        }
        manifest.members.push(name);
    }
    Ok(())
}

impl RunManifest {
    fn stamp_now(&mut self) {
        let now = unix_now();
        self.started_unix = now;
        self.finished_unix = now;
    }
}

/// Runs a κ- or ε-sweep. Members go to `member_NN/`; the degenerate
/// reference of an ε-sweep goes to `reference/`.
pub fn sweep(config: &Config, kind: SweepKind, out: &Path) -> Result<RunManifest> {
    let clock = Clock::start();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let hash = config.hash();
    let base = config.sim_config();
    let opts = config.sweep_options();
    let config_file = write_file(out, CONFIG_FILE, &config.to_toml())?;
    let mut m = blank_manifest("sweep", &hash, &base);
    let (kind_name, params) = match kind {
        SweepKind::Kappa => ("kappa", config.sweep.kappas.clone()),
        SweepKind::Eps => ("eps", config.sweep.eps.clone()),
    };
    m.parameters.sweep_kind = Some(kind_name.to_string());
    m.parameters.sweep_params = params.clone();
    if kind == SweepKind::Eps {
        m.parameters.kappa = config.sweep.eps_kappa;
        m.mode = mode_name(Mode::Regularized);
    } else {
        m.mode = mode_name(Mode::Degenerate);
    }
    m.outputs.push(config_file);
    info!("{kind_name} sweep over {params:?}");
    let result = match kind {
        SweepKind::Kappa => kappa_sweep(&base, &params, &opts),
        SweepKind::Eps => eps_sweep(&base, config.sweep.eps_kappa, &params, &opts),
    };
    let SweepResult {
        summary,
        members,
        reference,
    } = match result {
        Ok(r) => r,
        Err(SweepError::Members { completed, failed }) => {
            m.status = Status::Partial;
            m.error = Some(format!("{} member(s) failed", failed.len()));
            m.failed_members = failed
                .iter()
                .map(|(p, e)| FailedMember {
                    param: *p,
                    error: e.to_string(),
                })
                .collect();
            write_members(out, &hash, &completed, &config.checks, &mut m)?;
            clock.stamp(&mut m);
            m.write(out)?;
            bail!(
                "sweep partially failed; completed members listed in {}",
                out.join(MANIFEST_FILE).display()
            );
        }
        Err(e) => {
            m.status = Status::Failed;
            m.error = Some(e.to_string());
            clock.stamp(&mut m);
            m.write(out)?;
            return Err(e.into());
        }
    };
    write_members(out, &hash, &members, &config.checks, &mut m)?;
    if let Some(r) = &reference {
        let dir = out.join("reference");
        let mut rm = write_run(&dir, &hash, &r.config, &r.trajectory, &r.diagnostics, &config.checks)?;
        rm.stamp_now();
        rm.write(&dir)?;
        m.members.push("reference".to_string());
    }
    m.checks.extend(sweep_checks(&summary, config));
    let file = SweepFile {
        config_hash: &hash,
        checks: &m.checks,
        summary: &summary,
    };
    m.outputs.push(write_file(out, SWEEP_SUMMARY_FILE, &json(&file))?);
    clock.stamp(&mut m);
    m.write(out)?;
    Ok(m)
}

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("missing manifest in {0}")]
    MissingManifest(PathBuf),
    #[error("check `{check}` failed for {file}: {detail}")]
    Failed {
        check: String,
        file: PathBuf,
        detail: String,
    },
}

fn fail(check: &str, file: &Path, detail: impl Into<String>) -> VerifyError {
    VerifyError::Failed {
        check: check.to_string(),
        file: file.to_path_buf(),
        detail: detail.into(),
    }
}

/// Names of the checks `verify` recomputed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub directories: usize,
    pub checks: Vec<String>,
}

impl VerifyReport {
    fn record(&mut self, check: &str) {
        if !self.checks.iter().any(|c| c == check) {
            self.checks.push(check.to_string());
        }
    }
}

/// Re-reads a `simulate` or `sweep` output directory and recomputes the
/// segregation identity and the mass balance from the written data.
pub fn verify(dir: &Path) -> std::result::Result<VerifyReport, VerifyError> {
    let mut report = VerifyReport::default();
    verify_into(dir, &mut report)?;
    Ok(report)
}

fn verify_into(dir: &Path, report: &mut VerifyReport) -> std::result::Result<(), VerifyError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|_| VerifyError::MissingManifest(dir.to_path_buf()))?;
    let m: RunManifest = serde_json::from_str(&text).map_err(|e| fail("manifest", &manifest_path, e.to_string()))?;
    report.directories += 1;
    if m.status != Status::Ok {
        return Err(fail(
            "status",
            &manifest_path,
            m.error.clone().unwrap_or_else(|| format!("{:?}", m.status)),
        ));
    }
    for out in &m.outputs {
        let path = dir.join(&out.path);
        let bytes = std::fs::read(&path).map_err(|e| fail("output_exists", &path, e.to_string()))?;
        if sha256_hex(&bytes) != out.sha256 {
            return Err(fail("checksum", &path, "contents differ from the manifest digest"));
        }
    }
    report.record("checksum");
    if let Some(c) = m.checks.iter().find(|c| !c.passed) {
        return Err(fail(
            &c.name,
            &manifest_path,
            format!("recorded value {} against tolerance {}", c.value, c.tolerance),
        ));
    }
    match m.kind.as_str() {
        "simulate" => verify_run(dir, &m, report)?,
        "sweep" => {
            for name in &m.members {
                verify_into(&dir.join(name), report)?;
            }
        }
        other => return Err(fail("manifest", &manifest_path, format!("unknown kind `{other}`"))),
    }
    Ok(())
}

fn tolerance(m: &RunManifest, name: &str) -> Option<f64> {
    m.checks.iter().find(|c| c.name == name).map(|c| c.tolerance)
}

fn verify_run(dir: &Path, m: &RunManifest, report: &mut VerifyReport) -> std::result::Result<(), VerifyError> {
    let path = dir.join(TRAJECTORY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| fail("trajectory", &path, e.to_string()))?;
    let rows = parse_trajectory(&text).map_err(|e| fail("trajectory", &path, e))?;
    let cells = m.parameters.cells;
    if cells == 0 || rows.is_empty() || rows.len() % cells != 0 {
        return Err(fail(
            "trajectory",
            &path,
            format!("{} rows do not fill {cells}-cell snapshots", rows.len()),
        ));
    }
    let h = m.parameters.h();
    let kappa = m.parameters.kappa;
    let snapshots: Vec<&[Row]> = rows.chunks(cells).collect();

    for r in &rows {
        if (r.n - (r.n_l + r.n_d)).abs() > 4.0 * f64::EPSILON * r.n.abs().max(1.0) {
            return Err(fail(
                "n_consistency",
                &path,
                format!("n = {} but n_l + n_d = {} at t = {}", r.n, r.n_l + r.n_d, r.t),
            ));
        }
    }
    report.record("n_consistency");

    if let Some(tol) = tolerance(m, "segregation") {
        for s in &snapshots {
            let lhs: f64 = h * s.iter().map(|r| ((1.0 - r.n) * r.p).abs()).sum::<f64>();
            let rhs: f64 = kappa * h * s.iter().map(|r| r.n.abs()).sum::<f64>();
            if (lhs - rhs).abs() > tol {
                return Err(fail(
                    "segregation",
                    &path,
                    format!("defect {:e} at t = {}", (lhs - rhs).abs(), s[0].t),
                ));
            }
        }
        report.record("segregation");
    }

    if let Some(tol) = tolerance(m, "mass_balance") {
        let summary_path = dir.join(SUMMARY_FILE);
        let text =
            std::fs::read_to_string(&summary_path).map_err(|e| fail("mass_balance", &summary_path, e.to_string()))?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| fail("mass_balance", &summary_path, e.to_string()))?;
        let source = v["diagnostics"]["source_integral"]
            .as_f64()
            .ok_or_else(|| fail("mass_balance", &summary_path, "no diagnostics.source_integral"))?;
        let mass = |s: &[Row]| h * s.iter().map(|r| r.n).sum::<f64>();
        let defect = mass(snapshots[snapshots.len() - 1]) - mass(snapshots[0]) - source;
        if defect.abs() > tol {
            return Err(fail("mass_balance", &path, format!("defect {defect:e}")));
        }
        report.record("mass_balance");
    }
    Ok(())
}
