//! Flat sectioned TOML configuration.
//!
//! Every key has a default, so an empty file is a complete configuration.
//! Unknown sections or keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;
use tumorlim::grid::FaceAverage;
use tumorlim::limit::{KappaChoice, SweepOptions};
use tumorlim::model::{Consumption, Death, Growth, KineticFunctions, ModelParams};
use tumorlim::solver::{DtControl, GridSpec, InitialCondition, Mode, NewtonSettings, SimConfig, SolverError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: parse error at line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthForm {
    Monod,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathForm {
    Hyperbolic,
    Exponential,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsumptionForm {
    Linear,
    Monod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Degenerate,
    Regularized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtMode {
    Adaptive,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceName {
    Arithmetic,
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaH {
    Larger,
    Smaller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mode: ModeName,
    pub kappa: f64,
    pub eps: f64,
    pub growth: GrowthForm,
    pub growth_rate: f64,
    pub growth_half: f64,
    pub death: DeathForm,
    pub death_rate: f64,
    pub death_beta: f64,
    pub consumption: ConsumptionForm,
    pub consumption_rate: f64,
    pub consumption_half: f64,
    pub mu: f64,
    pub diffusion: f64,
    pub c_inf: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            mode: ModeName::Degenerate,
            kappa: 0.1,
            eps: 0.05,
            growth: GrowthForm::Monod,
            growth_rate: 1.0,
            growth_half: 0.5,
            death: DeathForm::Hyperbolic,
            death_rate: 0.3,
            death_beta: 2.0,
            consumption: ConsumptionForm::Linear,
            consumption_rate: 0.5,
            consumption_half: 0.5,
            mu: 0.5,
            diffusion: 1.0,
            c_inf: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub cells: usize,
    pub a: f64,
    pub b: f64,
    pub face_average: FaceName,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells: 200,
            a: 0.0,
            b: 10.0,
            face_average: FaceName::Arithmetic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub snapshots: usize,
    pub dt_mode: DtMode,
    /// Initial step for adaptive control, the step itself when fixed.
    pub dt: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self {
            t_end: 0.5,
            snapshots: 50,
            dt_mode: DtMode::Adaptive,
            dt: 1e-4,
            dt_max: 2e-3,
            cfl: 0.4,
            newton_tol: 1e-10,
            newton_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub amplitude: f64,
    pub width_fraction: f64,
    pub kappa_offset: bool,
    pub theta_min: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        let d = InitialCondition::default();
        Self {
            amplitude: d.amplitude,
            width_fraction: d.width_fraction,
            kappa_offset: d.kappa_offset,
            theta_min: d.theta_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub kappas: Vec<f64>,
    pub eps: Vec<f64>,
    /// Stiffness at which the ε-sweep runs.
    pub eps_kappa: f64,
    pub slack_tol: f64,
    pub kappa_h: KappaH,
    pub dual_eps: f64,
    pub dual_substeps: usize,
    pub dual_energy_tol: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepOptions::default();
        Self {
            kappas: vec![0.5, 0.2, 0.1, 0.05, 0.02],
            eps: vec![0.1, 0.05, 0.025],
            eps_kappa: 0.5,
            slack_tol: d.slack_tol,
            kappa_h: KappaH::Larger,
            dual_eps: d.dual_eps,
            dual_substeps: d.dual_substeps,
            dual_energy_tol: d.dual_energy_tol,
        }
    }
}

/// Which run checks are evaluated, and their tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksSection {
    pub segregation: bool,
    pub segregation_tol: f64,
    pub positivity: bool,
    pub positivity_tol: f64,
    pub nutrient_barrier: bool,
    pub nutrient_tol: f64,
    pub mass_balance: bool,
    pub mass_tol: f64,
    pub barrier: bool,
    pub rho_min: f64,
    pub energy_finite: bool,
}

impl Default for ChecksSection {
    fn default() -> Self {
        Self {
            segregation: true,
            segregation_tol: 1e-13,
            positivity: true,
            positivity_tol: 1e-12,
            nutrient_barrier: true,
            nutrient_tol: 1e-10,
            mass_balance: true,
            mass_tol: 1e-8,
            barrier: true,
            rho_min: 1e-3,
            energy_finite: true,
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    pub sweep: SweepSection,
    pub checks: ChecksSection,
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            ConfigError::Parse {
                path: origin.to_string(),
                line,
                message: e.message().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes to JSON");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !(m.kappa > 0.0) || !m.kappa.is_finite() {
            return Err(invalid("model.kappa", "must be finite and > 0"));
        }
        let rates = [
            ("model.growth_rate", m.growth_rate),
            ("model.growth_half", m.growth_half),
            ("model.death_rate", m.death_rate),
            ("model.death_beta", m.death_beta),
            ("model.consumption_rate", m.consumption_rate),
            ("model.consumption_half", m.consumption_half),
        ];
        for (field, v) in rates {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(field, "must be finite and >= 0"));
            }
        }
        if m.growth == GrowthForm::Monod && m.growth_half <= 0.0 {
            return Err(invalid("model.growth_half", "must be > 0 for monod growth"));
        }
        if m.consumption == ConsumptionForm::Monod && m.consumption_half <= 0.0 {
            return Err(invalid("model.consumption_half", "must be > 0 for monod consumption"));
        }
        let s = &self.sweep;
        for (field, list) in [("sweep.kappas", &s.kappas), ("sweep.eps", &s.eps)] {
            if list.is_empty() {
                return Err(invalid(field, "must list at least one value"));
            }
            if list.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(invalid(field, "every value must be finite and > 0"));
            }
        }
        if s.eps.iter().any(|&e| e >= 1.0) {
            return Err(invalid("sweep.eps", "every value must be < 1"));
        }
        if !(s.eps_kappa > 0.0) {
            return Err(invalid("sweep.eps_kappa", "must be > 0"));
        }
        if !(s.slack_tol >= 0.0) {
            return Err(invalid("sweep.slack_tol", "must be >= 0"));
        }
        if !(s.dual_eps > 0.0) {
            return Err(invalid("sweep.dual_eps", "must be > 0"));
        }
        if s.dual_substeps == 0 {
            return Err(invalid("sweep.dual_substeps", "must be >= 1"));
        }
        self.sim_config().validate().map_err(|e| match e {
            SolverError::Config { field, reason } => invalid(&qualified(field), reason),
            SolverError::Grid(g) => invalid("grid", g.to_string()),
            other => invalid("model", other.to_string()),
        })
    }

    pub fn sim_config(&self) -> SimConfig {
        let m = &self.model;
        let kinetics = KineticFunctions {
            growth: match m.growth {
                GrowthForm::Monod => Growth::Monod {
                    rate: m.growth_rate,
                    half: m.growth_half,
                },
                GrowthForm::Linear => Growth::Linear { rate: m.growth_rate },
            },
            death: match m.death {
                DeathForm::Hyperbolic => Death::Hyperbolic {
                    rate: m.death_rate,
                    beta: m.death_beta,
                },
                DeathForm::Exponential => Death::Exponential {
                    rate: m.death_rate,
                    beta: m.death_beta,
                },
                DeathForm::Constant => Death::Constant { rate: m.death_rate },
            },
            consumption: match m.consumption {
                ConsumptionForm::Linear => Consumption::Linear {
                    rate: m.consumption_rate,
                },
                ConsumptionForm::Monod => Consumption::Monod {
                    rate: m.consumption_rate,
                    half: m.consumption_half,
                },
            },
            mu: m.mu,
            diffusion: m.diffusion,
            c_inf: m.c_inf,
        };
        let t = &self.time;
        SimConfig {
            grid: GridSpec {
                cells: self.grid.cells,
                a: self.grid.a,
                b: self.grid.b,
                face_average: self.face_average(),
            },
            model: ModelParams {
                kappa: m.kappa,
                eps: m.eps,
                kinetics,
            },
            mode: match m.mode {
                ModeName::Degenerate => Mode::Degenerate,
                ModeName::Regularized => Mode::Regularized,
            },
            t_end: t.t_end,
            snapshots: t.snapshots,
            dt: match t.dt_mode {
                DtMode::Fixed => DtControl::Fixed { dt: t.dt },
                DtMode::Adaptive => DtControl::Adaptive {
                    initial: t.dt,
                    max: t.dt_max,
                },
            },
            cfl: t.cfl,
            newton: NewtonSettings {
                tol: t.newton_tol,
                max_iter: t.newton_max_iter,
            },
            initial: InitialCondition {
                amplitude: self.initial.amplitude,
                width_fraction: self.initial.width_fraction,
                kappa_offset: self.initial.kappa_offset,
                theta_min: self.initial.theta_min,
            },
        }
    }

    pub fn face_average(&self) -> FaceAverage {
        match self.grid.face_average {
            FaceName::Arithmetic => FaceAverage::Arithmetic,
            FaceName::Harmonic => FaceAverage::Harmonic,
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        let s = &self.sweep;
        SweepOptions {
            slack_tol: s.slack_tol,
            kappa_h: match s.kappa_h {
                KappaH::Larger => KappaChoice::Larger,
                KappaH::Smaller => KappaChoice::Smaller,
            },
            dual_eps: s.dual_eps,
            dual_substeps: s.dual_substeps,
            dual_energy_tol: s.dual_energy_tol,
            face_average: self.face_average(),
        }
    }
}

fn qualified(field: &str) -> String {
    let section = match field {
        "epsilon" => return "model.eps".to_string(),
        "dt" | "dt_initial" => return "time.dt".to_string(),
        "t_end" | "snapshots" | "dt_max" | "cfl" | "newton_tol" | "newton_max_iter" => "time",
        "amplitude" | "width_fraction" | "theta_min" => "initial",
        _ => "model",
    };
    format!("{section}.{field}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let c = Config::parse("", "<empty>").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.sim_config(), SimConfig::default());
    }

    #[test]
    fn emitted_defaults_round_trip() {
        let text = Config::default().to_toml();
        let back = Config::parse(&text, "<defaults>").unwrap();
        assert_eq!(back.hash(), Config::default().hash());
    }

    #[test]
    fn negative_kappa_names_the_field() {
        let err = Config::parse("[model]\nkappa = -1.0\n", "f").unwrap_err();
        assert!(err.to_string().contains("kappa"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let err = Config::parse("[grid]\ncells = 10\nbogus = 1\n", "f").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        assert!(Config::parse("[nope]\n", "f").is_err());
    }

    #[test]
    fn core_validation_is_qualified() {
        let err = Config::parse("[time]\ncfl = 2.0\n", "f").unwrap_err();
        assert!(err.to_string().contains("time.cfl"), "{err}");
        let err = Config::parse("[model]\nmode = \"regularized\"\neps = 1.5\n", "f").unwrap_err();
        assert!(err.to_string().contains("eps"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let mut c = Config::default();
        let h = c.hash();
        c.model.kappa = 0.2;
        assert_ne!(h, c.hash());
        assert_eq!(h.len(), 64);
    }
}
