//! Constitutive laws of the two-population model.
//!
//! Everything here is a pure function of its arguments: the singular
//! pressure law `p = κ n / (1 - n)`, its Kirchhoff transform (enthalpy)
//! `H(n) = ∫₀ⁿ s p'(s) ds`, the ε-regularized mobilities used by the
//! non-degenerate approximation, and the nutrient-dependent kinetics.

use log::warn;
use serde::Serialize;
use thiserror::Error;

/// Densities in `[SATURATION_CLAMP, 1)` are pulled back to this value.
pub const SATURATION_CLAMP: f64 = 1.0 - 1e-9;

/// Number of uniformly spaced samples used by the structural checks.
pub const ASSUMPTION_SAMPLES: usize = 10_000;

/// Strictness tolerance of the monotonicity checks.
pub const STRICTNESS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{quantity} = {value} is outside its domain {domain}")]
    Domain {
        quantity: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    Parameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn check_density(n: f64) -> Result<f64, ModelError> {
    if !(n >= 0.0) || n >= 1.0 {
        return Err(ModelError::Domain {
            quantity: "n",
            value: n,
            domain: "[0, 1)",
        });
    }
    if n > SATURATION_CLAMP {
        warn!("density {n} clamped to {SATURATION_CLAMP}");
        return Ok(SATURATION_CLAMP);
    }
    Ok(n)
}

/// Singular pressure law `p_κ(n) = κ n / (1 - n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PressureLaw {
    kappa: f64,
}

impl PressureLaw {
    pub fn new(kappa: f64) -> Result<Self, ModelError> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(ModelError::Parameter {
                name: "kappa",
                value: kappa,
                reason: "must be finite and > 0",
            });
        }
        Ok(Self { kappa })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn pressure(&self, n: f64) -> Result<f64, ModelError> {
        check_density(n).map(|n| self.pressure_unchecked(n))
    }

    /// Inverse of the pressure law, `n = p / (κ + p)`.
    pub fn pressure_inverse(&self, p: f64) -> Result<f64, ModelError> {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(ModelError::Domain {
                quantity: "p",
                value: p,
                domain: "[0, ∞)",
            });
        }
        Ok(p / (self.kappa + p))
    }

    pub fn enthalpy(&self, n: f64) -> Result<f64, ModelError> {
        check_density(n).map(|n| self.enthalpy_unchecked(n))
    }

    /// `Φ(n) = ∫₀ⁿ H(s) ds = κ(-2n - (2 - n) ln(1 - n))`.
    pub fn enthalpy_primitive(&self, n: f64) -> Result<f64, ModelError> {
        check_density(n).map(|n| self.kappa * (-2.0 * n - (2.0 - n) * (-n).ln_1p()))
    }

    /// Total versions for diagnostics: `n` is clamped to `[0, SATURATION_CLAMP]`.
    pub fn pressure_clamped(&self, n: f64) -> f64 {
        self.pressure_unchecked(n.clamp(0.0, SATURATION_CLAMP))
    }

    pub fn enthalpy_clamped(&self, n: f64) -> f64 {
        self.enthalpy_unchecked(n.clamp(0.0, SATURATION_CLAMP))
    }

    pub fn primitive_clamped(&self, n: f64) -> f64 {
        let n = n.clamp(0.0, SATURATION_CLAMP);
        self.kappa * (-2.0 * n - (2.0 - n) * (-n).ln_1p())
    }

    #[inline]
    pub(crate) fn pressure_unchecked(&self, n: f64) -> f64 {
        self.kappa * n / (1.0 - n)
    }

    #[inline]
    pub(crate) fn enthalpy_unchecked(&self, n: f64) -> f64 {
        self.kappa * (n / (1.0 - n) + (-n).ln_1p())
    }

    /// `H'(n) = n p'(n) = κ n / (1 - n)²`.
    #[inline]
    pub fn enthalpy_derivative(&self, n: f64) -> f64 {
        let m = 1.0 - n;
        self.kappa * n / (m * m)
    }
}

/// Free-function form of [`PressureLaw::pressure`].
pub fn pressure(n: f64, kappa: f64) -> Result<f64, ModelError> {
    PressureLaw::new(kappa)?.pressure(n)
}

/// Free-function form of [`PressureLaw::enthalpy`].
pub fn enthalpy(n: f64, kappa: f64) -> Result<f64, ModelError> {
    PressureLaw::new(kappa)?.enthalpy(n)
}

/// Total regularized mobility χ_ε.
pub fn chi_eps(n: f64, eps: f64, kappa: f64) -> f64 {
    if n < 0.0 {
        kappa * eps
    } else if n <= 1.0 - eps {
        let m = 1.0 - n;
        kappa * (n + eps) / (m * m)
    } else {
        kappa / (eps * eps)
    }
}

/// Cross mobility χ_{z,ε}: the species fraction `z` replaces `n` in the
/// numerator of the middle branch only.
pub fn chi_partial(z: f64, n: f64, eps: f64, kappa: f64) -> f64 {
    if n < 0.0 {
        kappa * eps
    } else if n <= 1.0 - eps {
        let m = 1.0 - n;
        kappa * (z + eps) / (m * m)
    } else {
        kappa / (eps * eps)
    }
}

/// Regularized enthalpy `H_ε(n) = ∫₀ⁿ χ_ε`, total on ℝ.
///
/// Middle branch: `κ((1 + ε) n/(1 - n) + ln(1 - n))`; the outer branches
/// continue linearly with the constant mobilities.
pub fn enthalpy_eps(n: f64, eps: f64, kappa: f64) -> f64 {
    if n < 0.0 {
        kappa * eps * n
    } else if n <= 1.0 - eps {
        kappa * ((1.0 + eps) * n / (1.0 - n) + (-n).ln_1p())
    } else {
        let top = 1.0 - eps;
        let at_top = kappa * ((1.0 + eps) * top / eps + eps.ln());
        at_top + kappa / (eps * eps) * (n - top)
    }
}

/// The ε-regularized transform `(κ, ε)` packaged for the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Regularization {
    pub kappa: f64,
    pub eps: f64,
}

impl Regularization {
    pub fn new(kappa: f64, eps: f64) -> Result<Self, ModelError> {
        PressureLaw::new(kappa)?;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(ModelError::Parameter {
                name: "epsilon",
                value: eps,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(Self { kappa, eps })
    }

    pub fn chi(&self, n: f64) -> f64 {
        chi_eps(n, self.eps, self.kappa)
    }

    pub fn chi_partial(&self, z: f64, n: f64) -> f64 {
        chi_partial(z, n, self.eps, self.kappa)
    }
}

/// A strictly increasing Kirchhoff transform used by the implicit
/// total-density step.
pub trait Enthalpy {
    fn value(&self, n: f64) -> f64;
    fn derivative(&self, n: f64) -> f64;
    /// Whether the transform blows up at `n = 1`.
    fn is_singular(&self) -> bool;
}

/// Continued by zero for `n < 0` so that iterates carrying scheme noise
/// below zero see a monotone transform.
impl Enthalpy for PressureLaw {
    fn value(&self, n: f64) -> f64 {
        if n <= 0.0 {
            0.0
        } else {
            self.enthalpy_unchecked(n)
        }
    }
    fn derivative(&self, n: f64) -> f64 {
        if n <= 0.0 {
            0.0
        } else {
            self.enthalpy_derivative(n)
        }
    }
    fn is_singular(&self) -> bool {
        true
    }
}

impl Enthalpy for Regularization {
    fn value(&self, n: f64) -> f64 {
        enthalpy_eps(n, self.eps, self.kappa)
    }
    fn derivative(&self, n: f64) -> f64 {
        self.chi(n)
    }
    fn is_singular(&self) -> bool {
        false
    }
}

/// Growth rate `G(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Growth {
    /// `g c / (c_half + c)`
    Monod { rate: f64, half: f64 },
    /// `g c`
    Linear { rate: f64 },
}

/// Death rate `K_D(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Death {
    /// `k0 / (1 + β c)`
    Hyperbolic { rate: f64, beta: f64 },
    /// `k0 exp(-β c)`
    Exponential { rate: f64, beta: f64 },
    /// `k0`
    Constant { rate: f64 },
}

/// Nutrient consumption `f(c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Consumption {
    /// `f c`
    Linear { rate: f64 },
    /// `f c / (c_half + c)`
    Monod { rate: f64, half: f64 },
}

impl Growth {
    pub fn eval(&self, c: f64) -> f64 {
        match *self {
            Growth::Monod { rate, half } => rate * c / (half + c),
            Growth::Linear { rate } => rate * c,
        }
    }
}

impl Death {
    pub fn eval(&self, c: f64) -> f64 {
        match *self {
            Death::Hyperbolic { rate, beta } => rate / (1.0 + beta * c),
            Death::Exponential { rate, beta } => rate * (-beta * c).exp(),
            Death::Constant { rate } => rate,
        }
    }
}

impl Consumption {
    pub fn eval(&self, c: f64) -> f64 {
        match *self {
            Consumption::Linear { rate } => rate * c,
            Consumption::Monod { rate, half } => rate * c / (half + c),
        }
    }

    /// `f(c) / c`, continued by `f'(0)` at the origin.
    pub fn slope(&self, c: f64) -> f64 {
        match *self {
            Consumption::Linear { rate } => rate,
            Consumption::Monod { rate, half } => rate / (half + c.max(0.0)),
        }
    }
}

/// Kinetic functions together with the scalar coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KineticFunctions {
    pub growth: Growth,
    pub death: Death,
    pub consumption: Consumption,
    /// Removal rate of dead cells.
    pub mu: f64,
    /// Nutrient diffusivity.
    pub diffusion: f64,
    /// Boundary nutrient level.
    pub c_inf: f64,
}

impl Default for KineticFunctions {
    fn default() -> Self {
        Self {
            growth: Growth::Monod { rate: 1.0, half: 0.5 },
            death: Death::Hyperbolic { rate: 0.3, beta: 2.0 },
            consumption: Consumption::Linear { rate: 0.5 },
            mu: 0.5,
            diffusion: 1.0,
            c_inf: 1.0,
        }
    }
}

/// Rates `(G(c), K_D(c), f(c))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub growth: f64,
    pub death: f64,
    pub consumption: f64,
}

/// Right-hand sides of the species and nutrient equations at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reactions {
    /// `(G - K_D) n_l`
    pub live: f64,
    /// `K_D n_l - μ n_d`
    pub dead: f64,
    /// `G n_l - μ n_d`
    pub total: f64,
    /// `f(c) n_l`
    pub consumption: f64,
}

impl KineticFunctions {
    pub fn kinetics_eval(&self, c: f64) -> Result<Rates, ModelError> {
        if !(c >= 0.0) {
            return Err(ModelError::Domain {
                quantity: "c",
                value: c,
                domain: "[0, ∞)",
            });
        }
        Ok(self.rates(c))
    }

    #[inline]
    pub(crate) fn rates(&self, c: f64) -> Rates {
        Rates {
            growth: self.growth.eval(c),
            death: self.death.eval(c),
            consumption: self.consumption.eval(c),
        }
    }

    pub fn reaction_terms(&self, n_l: f64, n_d: f64, c: f64) -> Result<Reactions, ModelError> {
        for (quantity, value) in [("n_l", n_l), ("n_d", n_d), ("c", c)] {
            if !(value >= 0.0) {
                return Err(ModelError::Domain {
                    quantity,
                    value,
                    domain: "[0, ∞)",
                });
            }
        }
        Ok(self.reactions(n_l, n_d, c))
    }

    /// Unchecked reactions; tiny negative inputs from scheme noise are used as is.
    #[inline]
    pub(crate) fn reactions(&self, n_l: f64, n_d: f64, c: f64) -> Reactions {
        let r = self.rates(c.max(0.0));
        let live = (r.growth - r.death) * n_l;
        let dead = r.death * n_l - self.mu * n_d;
        Reactions {
            live,
            dead,
            total: r.growth * n_l - self.mu * n_d,
            consumption: r.consumption * n_l,
        }
    }

    /// Suprema of `G` and `f` over `[0, c_max]`.
    pub fn derived_constants(&self, c0: &[f64]) -> DerivedConstants {
        let c0_max = c0.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let c_max = c0_max.max(self.c_inf.abs());
        let (mut g_m, mut f_m) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for xi in sample_grid(c_max) {
            let r = self.rates(xi);
            g_m = g_m.max(r.growth);
            f_m = f_m.max(r.consumption);
        }
        DerivedConstants { c_max, g_m, f_m }
    }

    pub fn validate_assumptions(&self, c_max: f64) -> AssumptionReport {
        let xs: Vec<f64> = sample_grid(c_max).collect();
        let g: Vec<f64> = xs.iter().map(|&c| self.growth.eval(c)).collect();
        let k: Vec<f64> = xs.iter().map(|&c| self.death.eval(c)).collect();
        let f: Vec<f64> = xs.iter().map(|&c| self.consumption.eval(c)).collect();

        let mut checks = Vec::with_capacity(4);
        checks.push(monotone_check(
            Assumption::A1,
            "f(0) = 0 and f strictly increasing",
            &xs,
            &f,
            Direction::Increasing,
        ));
        checks.push(monotone_check(
            Assumption::A2,
            "G(0) = 0 and G strictly increasing",
            &xs,
            &g,
            Direction::Increasing,
        ));
        let mut a3 = monotone_check(
            Assumption::A3,
            "K_D >= 0 and strictly decreasing",
            &xs,
            &k,
            Direction::Decreasing,
        );
        if a3.passed {
            if let Some(i) = k.iter().position(|&v| v < 0.0) {
                a3.passed = false;
                a3.witness = Some(xs[i]);
            }
        }
        checks.push(a3);
        let k0 = self.death.eval(0.0);
        let a4_ok = self.mu > k0 && k0 > 0.0;
        checks.push(AssumptionCheck {
            id: Assumption::A4,
            statement: "mu > K_D(0) > 0",
            passed: a4_ok,
            witness: (!a4_ok).then_some(0.0),
        });
        AssumptionReport { checks }
    }
}

fn sample_grid(c_max: f64) -> impl Iterator<Item = f64> {
    let m = ASSUMPTION_SAMPLES - 1;
    (0..ASSUMPTION_SAMPLES).map(move |i| c_max * i as f64 / m as f64)
}

#[derive(Clone, Copy)]
enum Direction {
    Increasing,
    Decreasing,
}

fn monotone_check(
    id: Assumption,
    statement: &'static str,
    xs: &[f64],
    ys: &[f64],
    direction: Direction,
) -> AssumptionCheck {
    let fail = |w: f64| AssumptionCheck {
        id,
        statement,
        passed: false,
        witness: Some(w),
    };
    // A1 and A2 additionally pin the value at the origin.
    if matches!(id, Assumption::A1 | Assumption::A2) && ys[0].abs() > STRICTNESS_TOL {
        return fail(0.0);
    }
    for i in 1..ys.len() {
        let step = ys[i] - ys[i - 1];
        let ok = match direction {
            Direction::Increasing => step > STRICTNESS_TOL,
            Direction::Decreasing => step < -STRICTNESS_TOL,
        };
        if !ok {
            return fail(xs[i]);
        }
    }
    AssumptionCheck {
        id,
        statement,
        passed: true,
        witness: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedConstants {
    pub c_max: f64,
    pub g_m: f64,
    pub f_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub id: Assumption,
    pub statement: &'static str,
    pub passed: bool,
    /// Sample point at which the check failed.
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.id == id)
    }
}

/// Model parameters: stiffness, regularization and kinetics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub kappa: f64,
    pub eps: f64,
    pub kinetics: KineticFunctions,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa: 0.1,
            eps: 0.05,
            kinetics: KineticFunctions::default(),
        }
    }
}

impl ModelParams {
    pub fn law(&self) -> Result<PressureLaw, ModelError> {
        PressureLaw::new(self.kappa)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        PressureLaw::new(self.kappa)?;
        let k = &self.kinetics;
        for (name, value) in [("mu", k.mu), ("diffusion", k.diffusion), ("c_inf", k.c_inf)] {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ModelError::Parameter {
                    name,
                    value,
                    reason: "must be finite and >= 0",
                });
            }
        }
        if !(k.diffusion > 0.0) {
            return Err(ModelError::Parameter {
                name: "diffusion",
                value: k.diffusion,
                reason: "must be > 0",
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pressure_values() {
        assert_eq!(pressure(0.0, 1.0).unwrap(), 0.0);
        assert_relative_eq!(pressure(0.5, 1.0).unwrap(), 1.0);
        assert_relative_eq!(pressure(0.9, 0.1).unwrap(), 0.9, epsilon = 1e-14);
        assert!(pressure(1.0, 1.0).is_err());
        assert!(pressure(-0.1, 1.0).is_err());
        assert!(pressure(0.5, -1.0).is_err());
    }

    #[test]
    fn near_saturation_is_clamped() {
        let law = PressureLaw::new(1.0).unwrap();
        let p = law.pressure(1.0 - 1e-12).unwrap();
        assert_relative_eq!(p, law.pressure(SATURATION_CLAMP).unwrap());
        assert!(p.is_finite());
    }

    #[test]
    fn chi_branches() {
        assert_relative_eq!(chi_eps(-0.1, 0.1, 1.0), 0.1);
        assert_relative_eq!(chi_eps(0.5, 0.1, 1.0), 2.4);
        assert_relative_eq!(chi_eps(0.95, 0.1, 1.0), 100.0);
        // continuity at 1 - ε
        assert_relative_eq!(chi_eps(0.9, 0.1, 1.0), 100.0, epsilon = 1e-10);
        assert_relative_eq!(chi_partial(0.2, 0.5, 0.1, 1.0), 1.2);
        assert_relative_eq!(chi_partial(7.0, -0.5, 0.1, 1.0), 0.1);
        assert_relative_eq!(chi_partial(0.5, 0.5, 0.1, 1.0), chi_eps(0.5, 0.1, 1.0));
    }

    #[test]
    fn enthalpy_eps_is_continuous_and_increasing() {
        let (eps, kappa) = (0.1, 1.0);
        assert_eq!(enthalpy_eps(0.0, eps, kappa), 0.0);
        let top = 1.0 - eps;
        let below = enthalpy_eps(top - 1e-9, eps, kappa);
        let above = enthalpy_eps(top + 1e-9, eps, kappa);
        assert!((above - below).abs() < 1e-6);
        assert!(enthalpy_eps(0.6, eps, kappa) > enthalpy_eps(0.5, eps, kappa));
        assert!(enthalpy_eps(-0.1, eps, kappa) < 0.0);
    }

    #[test]
    fn kinetics_at_zero_and_monotone() {
        let k = KineticFunctions::default();
        let r0 = k.kinetics_eval(0.0).unwrap();
        assert_eq!(r0.growth, 0.0);
        assert_eq!(r0.consumption, 0.0);
        assert!(r0.death > 0.0);
        assert!(k.growth.eval(1.0) > k.growth.eval(0.5));
        assert!(k.death.eval(1.0) < k.death.eval(0.5));
        assert!(k.kinetics_eval(-1.0).is_err());
    }

    #[test]
    fn reaction_arithmetic() {
        let k = KineticFunctions::default();
        let r = k.reaction_terms(0.0, 0.0, 0.7).unwrap();
        assert_eq!((r.live, r.dead, r.total, r.consumption), (0.0, 0.0, 0.0, 0.0));

        // K_D = 0.2, G = 0.5, μ = 0.3 at every c
        let k = KineticFunctions {
            growth: Growth::Linear { rate: 0.5 },
            death: Death::Constant { rate: 0.2 },
            mu: 0.3,
            ..KineticFunctions::default()
        };
        let r = k.reaction_terms(1.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(r.live, 0.3);
        assert_relative_eq!(r.dead, 0.2);
        assert_relative_eq!(r.total, 0.5);
        assert!(k.reaction_terms(-1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn derived_constants_monotone_sup() {
        let k = KineticFunctions::default();
        let d = k.derived_constants(&[0.0; 8]);
        assert_eq!(d.c_max, 1.0);
        assert_relative_eq!(d.g_m, k.growth.eval(1.0));
        assert_relative_eq!(d.f_m, k.consumption.eval(1.0));
    }

    #[test]
    fn assumption_report() {
        let k = KineticFunctions::default();
        assert!(k.validate_assumptions(1.0).all_passed());

        let k0 = KineticFunctions {
            mu: 0.0,
            ..KineticFunctions::default()
        };
        let report = k0.validate_assumptions(1.0);
        assert!(!report.get(Assumption::A4).unwrap().passed);
        assert!(report.get(Assumption::A1).unwrap().passed);

        let flat = KineticFunctions {
            death: Death::Constant { rate: 0.3 },
            ..KineticFunctions::default()
        };
        let a3 = flat.validate_assumptions(1.0);
        let a3 = a3.get(Assumption::A3).unwrap();
        assert!(!a3.passed);
        assert!(a3.witness.is_some());
    }

    #[test]
    fn primitive_small_n_expansion() {
        let law = PressureLaw::new(0.3).unwrap();
        let n: f64 = 1e-3;
        assert_relative_eq!(
            law.enthalpy_primitive(n).unwrap(),
            0.3 * n.powi(3) / 6.0,
            max_relative = 1e-2
        );
    }
}
