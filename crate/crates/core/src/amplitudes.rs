//! Real-space amplitudes for an atom that starts in `|a⟩` and is hit by two
//! `A`-polarized photons arriving from `r < 0`.
//!
//! All values are in the frame rotating at `ω_a` and use `Θ(0) = 1`.
//! The closed forms cover the resonant symmetrized-exponential pulse
//! `N [f1(r1) f2(r2) + f1(r2) f2(r1)]`, `f_k(r) = Θ(−r) exp(Δ_k r / 2c)`.
//! [`psi_a_general`] evaluates the same excited-state solution by quadrature
//! for any packet that lives in `r < 0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, PulseParams};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::special::exp_difference;

pub type ComplexAmplitude = Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Normalization of the symmetrized two-photon packet,
/// `N = π ϱ sqrt(Δ1 Δ2 / (1 + r12))`.
pub fn normalization_n(pulse: &PulseParams, rho: f64) -> Result<f64> {
    pulse.require_resonant()?;
    crate::model::check_positive("rho", rho)?;
    let r12 = pulse.overlap_ratio();
    Ok(PI * rho * (pulse.delta1() * pulse.delta2() / (1.0 + r12)).sqrt())
}

/// `φ^AA(r1, r2, 0)` for the symmetrized exponential packet.
pub fn initial_wavepacket(r1: f64, r2: f64, config: &ModelConfig) -> Result<ComplexAmplitude> {
    let n = normalization_n(&config.pulse, config.rho())?;
    Ok(Complex64::new(
        n * exponential_pair(r1, r2, &config.pulse, config.c()),
        0.0,
    ))
}

fn envelope(r: f64, delta: f64, c: f64) -> f64 {
    if r <= 0.0 {
        (0.5 * delta * r / c).exp()
    } else {
        0.0
    }
}

fn exponential_pair(r1: f64, r2: f64, pulse: &PulseParams, c: f64) -> f64 {
    let (d1, d2) = (pulse.delta1(), pulse.delta2());
    envelope(r1, d1, c) * envelope(r2, d2, c) + envelope(r2, d1, c) * envelope(r1, d2, c)
}

/// Closed-form excited-state amplitude for the resonant exponential packet,
/// with the common factor `N g_a` pulled out so that it does not depend on
/// the mode density.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ExcitedShape {
    half_gamma: f64,
    gamma_a: f64,
    half_d1: f64,
    half_d2: f64,
    c: f64,
}

/// Time-dependent factors of [`ExcitedShape`] at a fixed time.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ShapeSlice<'a> {
    shape: &'a ExcitedShape,
    t: f64,
    /// `e^{−Γt/2} ∫_0^t e^{(Γ−Δ_k)t'/2} dt'` for k = 1, 2.
    ramp1: f64,
    ramp2: f64,
}

impl ExcitedShape {
    pub(crate) fn new(config: &ModelConfig) -> Result<Self> {
        config.pulse.require_resonant()?;
        Ok(Self {
            half_gamma: 0.5 * config.atom.gamma(),
            gamma_a: config.atom.gamma_a(),
            half_d1: 0.5 * config.pulse.delta1(),
            half_d2: 0.5 * config.pulse.delta2(),
            c: config.c(),
        })
    }

    pub(crate) fn at(&self, t: f64) -> ShapeSlice<'_> {
        ShapeSlice {
            shape: self,
            t,
            ramp1: exp_difference(self.half_d1, self.half_gamma, t),
            ramp2: exp_difference(self.half_d2, self.half_gamma, t),
        }
    }
}

impl ShapeSlice<'_> {
    /// One photon absorbed while the other is still in flight.
    pub(crate) fn direct(&self, r: f64) -> f64 {
        let s = self.shape;
        let tau = self.t - r / s.c;
        if tau < 0.0 {
            return 0.0;
        }
        -2.0 * ((-s.half_d1 * tau).exp() * self.ramp2 + (-s.half_d2 * tau).exp() * self.ramp1)
    }

    /// Stimulated-emission contribution, supported on `0 ≤ r ≤ ct`.
    pub(crate) fn stimulated(&self, r: f64) -> f64 {
        let s = self.shape;
        let tau = self.t - r / s.c;
        if r < 0.0 || tau < 0.0 {
            return 0.0;
        }
        let u = r / s.c;
        let a1 = exp_difference(s.half_d1, s.half_gamma, u);
        let a2 = exp_difference(s.half_d2, s.half_gamma, u);
        let b1 = exp_difference(s.half_d1, s.half_gamma, tau);
        let b2 = exp_difference(s.half_d2, s.half_gamma, tau);
        2.0 * s.gamma_a * ((-s.half_d1 * tau).exp() * a1 * b2 + (-s.half_d2 * tau).exp() * a2 * b1)
    }
}

fn closed_form_scale(config: &ModelConfig) -> Result<f64> {
    Ok(normalization_n(&config.pulse, config.rho())? * config.g_a())
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(
            "t",
            format!("must be finite and >= 0, got {t}"),
        ))
    }
}

/// First term of the excited-state amplitude: one photon drives the atom
/// while the other propagates freely. Zero outside the light cone `r > ct`.
pub fn psi_a1(r: f64, t: f64, config: &ModelConfig) -> Result<ComplexAmplitude> {
    check_time(t)?;
    let shape = ExcitedShape::new(config)?;
    let v = closed_form_scale(config)? * shape.at(t).direct(r);
    Ok(Complex64::new(v, 0.0))
}

/// Stimulated-emission term of the excited-state amplitude, nonzero only for
/// `0 < r < ct`.
pub fn psi_a2(r: f64, t: f64, config: &ModelConfig) -> Result<ComplexAmplitude> {
    check_time(t)?;
    let shape = ExcitedShape::new(config)?;
    let v = closed_form_scale(config)? * shape.at(t).stimulated(r);
    Ok(Complex64::new(v, 0.0))
}

/// Full excited-state amplitude `ψ^A(r, t)` for an atom initially in `|a⟩`.
pub fn psi_a(r: f64, t: f64, config: &ModelConfig) -> Result<ComplexAmplitude> {
    check_time(t)?;
    let shape = ExcitedShape::new(config)?;
    let slice = shape.at(t);
    let v = closed_form_scale(config)? * (slice.direct(r) + slice.stimulated(r));
    Ok(Complex64::new(v, 0.0))
}

/// Outgoing amplitude with the atom in `|b⟩`, a `B` photon at `r2` and an
/// `A` photon at `r1`.
pub fn phi_ba(r1: f64, r2: f64, t: f64, config: &ModelConfig) -> Result<ComplexAmplitude> {
    check_time(t)?;
    let c = config.c();
    let delay = t - r2 / c;
    if r2 < 0.0 || delay < 0.0 {
        return Ok(ZERO);
    }
    let prefactor = (2.0 * PI * config.rho() * config.atom.gamma_b()).sqrt() / 2.0;
    let phase = Complex64::from_polar(1.0, -config.atom.delta_ab() * r2 / c);
    Ok(psi_a(r1 - r2, delay, config)? * phase * prefactor)
}

/// One function of a single position, used as a factor of a separable packet.
pub type Profile = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub struct SeparableTerm {
    pub coeff: Complex64,
    pub left: Profile,
    pub right: Profile,
}

impl fmt::Debug for SeparableTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeparableTerm")
            .field("coeff", &self.coeff)
            .finish_non_exhaustive()
    }
}

/// A two-photon packet `Σ c_n [L_n(r1) R_n(r2) + L_n(r2) R_n(r1)]` that vanishes
/// whenever either coordinate exceeds `support_max ≤ 0`.
///
/// Amplitudes follow the same mode-density convention as the closed forms,
/// so a properly normalized packet satisfies
/// `2/(2πϱc)² ∬ |φ|² = 1`.
#[derive(Debug, Clone)]
pub struct CustomPacket {
    terms: Vec<SeparableTerm>,
    support_max: f64,
}

impl CustomPacket {
    pub fn new(support_max: f64) -> Result<Self> {
        if support_max > 0.0 || !support_max.is_finite() {
            return Err(Error::domain(
                "support_max",
                format!("packet must start at r <= 0, got {support_max}"),
            ));
        }
        Ok(Self {
            terms: Vec::new(),
            support_max,
        })
    }

    pub fn with_term(mut self, coeff: Complex64, left: Profile, right: Profile) -> Self {
        self.terms.push(SeparableTerm { coeff, left, right });
        self
    }

    pub fn support_max(&self) -> f64 {
        self.support_max
    }

    pub fn eval(&self, r1: f64, r2: f64) -> Complex64 {
        if r1 > self.support_max || r2 > self.support_max {
            return ZERO;
        }
        self.terms.iter().fold(ZERO, |acc, term| {
            acc + term.coeff
                * ((term.left)(r1) * (term.right)(r2) + (term.left)(r2) * (term.right)(r1))
        })
    }
}

/// Initial two-photon state.
#[derive(Debug, Clone)]
pub enum WavepacketSpec {
    /// The resonant exponential pair described by the config's pulse.
    SymmetrizedExponential,
    Custom(CustomPacket),
}

impl WavepacketSpec {
    fn support_max(&self) -> f64 {
        match self {
            WavepacketSpec::SymmetrizedExponential => 0.0,
            WavepacketSpec::Custom(p) => p.support_max,
        }
    }

    fn eval(&self, r1: f64, r2: f64, config: &ModelConfig, n: f64) -> Complex64 {
        match self {
            WavepacketSpec::SymmetrizedExponential => {
                Complex64::new(n * exponential_pair(r1, r2, &config.pulse, config.c()), 0.0)
            }
            WavepacketSpec::Custom(p) => p.eval(r1, r2),
        }
    }
}

/// Excited-state amplitude for an arbitrary incident packet, evaluated by
/// nested adaptive quadrature of the general solution.
///
/// The atom starts in `|a⟩`, so the free-decay term vanishes and only the
/// driven and stimulated integrals remain.
pub fn psi_a_general(
    r: f64,
    t: f64,
    packet: &WavepacketSpec,
    config: &ModelConfig,
    quad: &QuadratureOptions,
) -> Result<ComplexAmplitude> {
    check_time(t)?;
    quad.validate()?;
    let n = match packet {
        WavepacketSpec::SymmetrizedExponential => normalization_n(&config.pulse, config.rho())?,
        WavepacketSpec::Custom(_) => 0.0,
    };
    let c = config.c();
    let half_gamma = 0.5 * config.atom.gamma();
    let g_a = config.g_a();
    let phi0 = |r1: f64, r2: f64| packet.eval(r1, r2, config, n);
    // Photon starting at −ct' reaches the atom only once −ct' ≤ support_max.
    let t_enter = (-packet.support_max() / c).max(0.0);

    let mut value = ZERO;
    if t > t_enter && r - c * t <= packet.support_max() {
        let driven = integrate(
            |tp: f64| phi0(r - c * t, -c * tp) * (-half_gamma * (t - tp)).exp(),
            t_enter,
            t,
            quad,
        )?;
        value += driven.value * (-2.0 * g_a);
    }

    let tau = t - r / c;
    if r >= 0.0 && tau >= 0.0 && tau > t_enter {
        let gamma_a = config.atom.gamma_a();
        let inner_opts = *quad;
        let mut failure = None;
        let stimulated = integrate(
            |tp: f64| {
                let inner = integrate(
                    |tpp: f64| phi0(-c * tp, -c * tpp) * (-half_gamma * (tau - tpp)).exp(),
                    t_enter,
                    tau,
                    &inner_opts,
                );
                match inner {
                    Ok(e) => e.value * (-half_gamma * (t - tp)).exp(),
                    Err(err) => {
                        failure.get_or_insert(err);
                        ZERO
                    }
                }
            },
            tau.max(t_enter),
            t,
            quad,
        )?;
        if let Some(err) = failure {
            return Err(err);
        }
        value += stimulated.value * (2.0 * gamma_a * g_a);
    }
    Ok(value)
}

/// Which amplitude a snapshot holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    PsiA,
    PhiBa,
}

/// Uniform 1D grid of positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositionGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl PositionGrid {
    pub fn new(min: f64, max: f64, count: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::domain(
                "r range",
                format!("need min < max, got [{min}, {max}]"),
            ));
        }
        if count < 2 {
            return Err(Error::domain("r points", "need at least 2 points"));
        }
        Ok(Self { min, max, count })
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.count - 1) as f64
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.count).map(move |i| {
            if i + 1 == self.count {
                self.max
            } else {
                self.min + h * i as f64
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub r: f64,
    /// Second coordinate, present for two-photon amplitudes.
    pub r2: Option<f64>,
    pub value: ComplexAmplitude,
}

/// Snapshot of `ψ^A(r, t)` or `φ^BA(r1, r2, t)` on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeField {
    pub kind: FieldKind,
    pub t: f64,
    pub grid: PositionGrid,
    pub samples: Vec<FieldSample>,
}

impl AmplitudeField {
    pub fn psi_a(config: &ModelConfig, t: f64, grid: PositionGrid) -> Result<Self> {
        let samples = grid
            .points()
            .map(|r| {
                Ok(FieldSample {
                    r,
                    r2: None,
                    value: psi_a(r, t, config)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: FieldKind::PsiA,
            t,
            grid,
            samples,
        })
    }

    /// Both coordinates run over `grid`; `r2` varies fastest.
    pub fn phi_ba(config: &ModelConfig, t: f64, grid: PositionGrid) -> Result<Self> {
        let mut samples = Vec::with_capacity(grid.count * grid.count);
        for r1 in grid.points() {
            for r2 in grid.points() {
                samples.push(FieldSample {
                    r: r1,
                    r2: Some(r2),
                    value: phi_ba(r1, r2, t, config)?,
                });
            }
        }
        Ok(Self {
            kind: FieldKind::PhiBa,
            t,
            grid,
            samples,
        })
    }
}
