//! Physical parameters of the atom, the incident pulse and the waveguide.
//!
//! Units: frequencies and rates share one unit (the examples and the CLI use
//! `Γ_a = 1`), times are in the inverse of that unit and lengths in `c` times
//! it. Every amplitude is evaluated in the frame rotating at the `e ↔ a`
//! transition frequency, so `omega_a` and `delta_ab` only ever contribute
//! phases; no probability depends on them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay rates and level structure of the lambda atom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtom")]
pub struct AtomParams {
    gamma_a: f64,
    gamma_b: f64,
    omega_a: f64,
    delta_ab: f64,
}

#[derive(Deserialize)]
struct RawAtom {
    gamma_a: f64,
    gamma_b: f64,
    #[serde(default)]
    omega_a: f64,
    #[serde(default)]
    delta_ab: f64,
}

impl TryFrom<RawAtom> for AtomParams {
    type Error = Error;
    fn try_from(raw: RawAtom) -> Result<Self> {
        AtomParams::new(raw.gamma_a, raw.gamma_b)?
            .with_omega_a(raw.omega_a)?
            .with_delta_ab(raw.delta_ab)
    }
}

impl AtomParams {
    pub fn new(gamma_a: f64, gamma_b: f64) -> Result<Self> {
        check_non_negative("gamma_a", gamma_a)?;
        check_non_negative("gamma_b", gamma_b)?;
        if gamma_a + gamma_b <= 0.0 {
            return Err(Error::domain(
                "gamma_a + gamma_b",
                "total decay rate must be positive",
            ));
        }
        Ok(Self {
            gamma_a,
            gamma_b,
            omega_a: 0.0,
            delta_ab: 0.0,
        })
    }

    /// Sets the `e ↔ a` transition frequency (a global phase only).
    pub fn with_omega_a(mut self, omega_a: f64) -> Result<Self> {
        check_finite("omega_a", omega_a)?;
        self.omega_a = omega_a;
        Ok(self)
    }

    /// Sets the ground-state splitting `ω_a − ω_b`.
    pub fn with_delta_ab(mut self, delta_ab: f64) -> Result<Self> {
        check_finite("delta_ab", delta_ab)?;
        self.delta_ab = delta_ab;
        Ok(self)
    }

    pub fn gamma_a(&self) -> f64 {
        self.gamma_a
    }

    pub fn gamma_b(&self) -> f64 {
        self.gamma_b
    }

    /// Total decay rate of the excited state.
    pub fn gamma(&self) -> f64 {
        self.gamma_a + self.gamma_b
    }

    pub fn omega_a(&self) -> f64 {
        self.omega_a
    }

    pub fn delta_ab(&self) -> f64 {
        self.delta_ab
    }

    /// Branching factor `4 Γ_a Γ_b / Γ²`, the Raman probability of a
    /// monochromatic resonant photon.
    pub fn branching_ratio(&self) -> f64 {
        let g = self.gamma();
        4.0 * self.gamma_a * self.gamma_b / (g * g)
    }
}

/// Linewidths and carrier detunings of the two exponential-envelope photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPulse")]
pub struct PulseParams {
    delta1: f64,
    delta2: f64,
    detuning1: f64,
    detuning2: f64,
}

#[derive(Deserialize)]
struct RawPulse {
    delta1: f64,
    delta2: f64,
    #[serde(default)]
    detuning1: f64,
    #[serde(default)]
    detuning2: f64,
}

impl TryFrom<RawPulse> for PulseParams {
    type Error = Error;
    fn try_from(raw: RawPulse) -> Result<Self> {
        PulseParams::new(raw.delta1, raw.delta2)?.with_detunings(raw.detuning1, raw.detuning2)
    }
}

impl PulseParams {
    /// Resonant pulse with the given linewidths.
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        check_positive("delta1", delta1)?;
        check_positive("delta2", delta2)?;
        Ok(Self {
            delta1,
            delta2,
            detuning1: 0.0,
            detuning2: 0.0,
        })
    }

    /// Carrier detunings `ω_Lk − ω_a`.
    pub fn with_detunings(mut self, detuning1: f64, detuning2: f64) -> Result<Self> {
        check_finite("detuning1", detuning1)?;
        check_finite("detuning2", detuning2)?;
        self.detuning1 = detuning1;
        self.detuning2 = detuning2;
        Ok(self)
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn detuning1(&self) -> f64 {
        self.detuning1
    }

    pub fn detuning2(&self) -> f64 {
        self.detuning2
    }

    pub fn is_resonant(&self) -> bool {
        self.detuning1 == 0.0 && self.detuning2 == 0.0
    }

    /// Fails unless both carriers sit on the `e ↔ a` resonance.
    pub fn require_resonant(&self) -> Result<()> {
        if self.is_resonant() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "closed forms need resonant photons, got detunings ({}, {})",
                self.detuning1, self.detuning2
            )))
        }
    }

    /// The same pulse with the two photons exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            delta1: self.delta2,
            delta2: self.delta1,
            detuning1: self.detuning2,
            detuning2: self.detuning1,
        }
    }

    /// Overlap ratio `4 Δ1 Δ2 / (Δ1 + Δ2)²`, in `(0, 1]`.
    pub fn overlap_ratio(&self) -> f64 {
        let s = self.delta1 + self.delta2;
        4.0 * self.delta1 * self.delta2 / (s * s)
    }
}

/// Atom, pulse and waveguide conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct ModelConfig {
    pub atom: AtomParams,
    pub pulse: PulseParams,
    rho: f64,
    c: f64,
}

#[derive(Deserialize)]
struct RawConfig {
    atom: AtomParams,
    pulse: PulseParams,
    #[serde(default = "one")]
    rho: f64,
    #[serde(default = "one")]
    c: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawConfig> for ModelConfig {
    type Error = Error;
    fn try_from(raw: RawConfig) -> Result<Self> {
        ModelConfig::new(raw.atom, raw.pulse)
            .with_rho(raw.rho)?
            .with_c(raw.c)
    }
}

impl ModelConfig {
    /// Config with unit mode density and unit propagation speed.
    pub fn new(atom: AtomParams, pulse: PulseParams) -> Self {
        Self {
            atom,
            pulse,
            rho: 1.0,
            c: 1.0,
        }
    }

    /// Shorthand for the common resonant case.
    pub fn resonant(gamma_a: f64, gamma_b: f64, delta1: f64, delta2: f64) -> Result<Self> {
        Ok(Self::new(
            AtomParams::new(gamma_a, gamma_b)?,
            PulseParams::new(delta1, delta2)?,
        ))
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        check_positive("rho", rho)?;
        self.rho = rho;
        Ok(self)
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        check_positive("c", c)?;
        self.c = c;
        Ok(self)
    }

    pub fn with_pulse(mut self, pulse: PulseParams) -> Self {
        self.pulse = pulse;
        self
    }

    pub fn with_atom(mut self, atom: AtomParams) -> Self {
        self.atom = atom;
        self
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn g_a(&self) -> f64 {
        coupling_g(self.atom.gamma_a, self.rho).expect("validated at construction")
    }

    pub fn g_b(&self) -> f64 {
        coupling_g(self.atom.gamma_b, self.rho).expect("validated at construction")
    }

    /// Slowest relevant rate, `min(Γ, Δ1, Δ2)`.
    pub fn slowest_rate(&self) -> f64 {
        self.atom
            .gamma()
            .min(self.pulse.delta1)
            .min(self.pulse.delta2)
    }
}

/// Per-mode coupling that reproduces the decay rate `gamma` in a flat
/// continuum of density `rho`: `g = sqrt(gamma / (2π rho))`.
pub fn coupling_g(gamma: f64, rho: f64) -> Result<f64> {
    check_non_negative("gamma", gamma)?;
    check_positive("rho", rho)?;
    Ok((gamma / (2.0 * PI * rho)).sqrt())
}

fn check_finite(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(field, format!("must be finite, got {v}")))
    }
}

fn check_non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            field,
            format!("must be finite and >= 0, got {v}"),
        ))
    }
}

pub(crate) fn check_positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupling_examples() {
        assert_eq!(coupling_g(0.0, 1.0).unwrap(), 0.0);
        assert!((coupling_g(2.0 * PI, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((coupling_g(1.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn coupling_rejects_bad_domain() {
        assert!(matches!(coupling_g(-1.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(coupling_g(1.0, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(coupling_g(1.0, -2.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn coupling_reproduces_rate() {
        for &(gamma, rho) in &[(0.3, 1.0), (1.0, 7.0), (12.5, 0.01), (1e-4, 3.0)] {
            let g = coupling_g(gamma, rho).unwrap();
            let back = g * g * 2.0 * PI * rho;
            assert!(((back - gamma) / gamma).abs() < 1e-12);
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(AtomParams::new(0.0, 0.0).is_err());
        assert!(AtomParams::new(-0.1, 1.0).is_err());
        assert!(AtomParams::new(1.0, f64::NAN).is_err());
        assert!(AtomParams::new(1.0, 0.0).is_ok());
        assert!(PulseParams::new(0.0, 1.0).is_err());
        assert!(PulseParams::new(1.0, -1.0).is_err());
        let cfg = ModelConfig::resonant(1.0, 0.5, 0.5, 0.5).unwrap();
        assert!(cfg.with_rho(0.0).is_err());
        assert!(cfg.with_c(-1.0).is_err());
        assert!(cfg.atom.with_omega_a(f64::INFINITY).is_err());
    }

    #[test]
    fn total_rate_is_sum() {
        let a = AtomParams::new(1.0, 0.5).unwrap();
        assert_eq!(a.gamma(), 1.5);
        assert!((a.branching_ratio() - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn resonance_gate() {
        let p = PulseParams::new(1.0, 2.0).unwrap();
        assert!(p.require_resonant().is_ok());
        let d = p.with_detunings(0.1, 0.0).unwrap();
        assert!(matches!(d.require_resonant(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn overlap_ratio_bounds() {
        let p = PulseParams::new(1.0, 1.0).unwrap();
        assert_eq!(p.overlap_ratio(), 1.0);
        let q = PulseParams::new(0.001, 100.0).unwrap();
        assert!(q.overlap_ratio() > 0.0 && q.overlap_ratio() < 1.0);
    }
}
