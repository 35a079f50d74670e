//! Ground-state transition probability `p_{a→b}` of the lambda atom and the
//! cascaded single-photon approximation used as its reference.
//!
//! The exact probability integrates `|φ^BA|²` over the region allowed by its
//! step functions. With `φ^BA ∝ ψ^A(r1 − r2, t − r2/c)` this is
//!
//! ```text
//! p(t) = Γ_b / (2πϱc²) ∫_0^{ct} dr2 [ ∫_{-∞}^{ct} |ψ^A1|² dr1
//!                                   + ∫_{r2}^{ct} (|ψ^A2|² + 2 Re ψ^A1* ψ^A2) dr1 ]
//! ```
//!
//! evaluated with nested adaptive quadrature. The mode density cancels
//! against `N² g_a²`, so the integrands below carry no `ϱ` at all.

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::amplitudes::ExcitedShape;
use crate::error::{Error, Result};
use crate::model::{AtomParams, ModelConfig};
use crate::quadrature::{geometric_breaks, integrate_panels, QuadValue, QuadratureOptions, Vector};

/// Evaluation time of a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Finite(f64),
    /// Converged long-time limit; carries the last horizon actually used.
    Asymptotic(f64),
}

/// Contributions to `p` from the three pieces of `|ψ^A1 + ψ^A2|²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct TermBreakdown {
    pub direct: f64,
    pub stimulated: f64,
    pub cross: f64,
}

impl TermBreakdown {
    pub fn total(&self) -> f64 {
        self.direct + self.stimulated + self.cross
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionResult {
    /// Raw quadrature value; may exceed 1 by at most the error estimate.
    pub p: f64,
    pub t: Horizon,
    pub estimated_error: f64,
    pub terms: TermBreakdown,
}

impl TransitionResult {
    fn zero(t: Horizon) -> Self {
        Self {
            p: 0.0,
            t,
            estimated_error: 0.0,
            terms: TermBreakdown::default(),
        }
    }

    /// `p` clipped to `[0, 1]` for reporting.
    pub fn clamped(&self) -> f64 {
        self.p.clamp(0.0, 1.0)
    }
}

/// Outer-integrand value: three term integrals plus the error carried up from
/// the inner quadratures. Only the term integrals drive error control.
#[derive(Debug, Clone, Copy)]
struct Carried {
    terms: Vector<3>,
    inner_error: f64,
}

impl Add for Carried {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Carried {
            terms: self.terms + rhs.terms,
            inner_error: self.inner_error + rhs.inner_error,
        }
    }
}

impl Sub for Carried {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Carried {
            terms: self.terms - rhs.terms,
            inner_error: self.inner_error - rhs.inner_error,
        }
    }
}

impl Mul<f64> for Carried {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Carried {
            terms: self.terms * rhs,
            inner_error: self.inner_error * rhs,
        }
    }
}

impl QuadValue for Carried {
    fn zero() -> Self {
        Carried {
            terms: Vector::zero(),
            inner_error: 0.0,
        }
    }
    fn magnitude(&self) -> f64 {
        self.terms.magnitude()
    }
    fn abs_sum(&self) -> f64 {
        self.terms.0.iter().map(|v| v.abs()).sum()
    }
}

/// Growth factor between the initial panels laid out from each endpoint.
const BREAK_RATIO: f64 = 4.0;

/// `Γ_b/(2πϱc²) · (N g_a)²`, which is independent of `ϱ`.
fn probability_prefactor(config: &ModelConfig) -> f64 {
    let (d1, d2) = (config.pulse.delta1(), config.pulse.delta2());
    let c = config.c();
    config.atom.gamma_a() * config.atom.gamma_b() * d1 * d2
        / (4.0 * c * c * (1.0 + config.pulse.overlap_ratio()))
}

/// `p_{a→b}(t)` for the resonant symmetrized-exponential pulse.
pub fn transition_probability(
    t: f64,
    config: &ModelConfig,
    quad: &QuadratureOptions,
) -> Result<TransitionResult> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(
            "t",
            format!("must be finite and >= 0, got {t}"),
        ));
    }
    quad.validate()?;
    let shape = ExcitedShape::new(config)?;
    let horizon = Horizon::Finite(t);
    if t == 0.0 || config.atom.gamma_b() == 0.0 {
        return Ok(TransitionResult::zero(horizon));
    }

    let c = config.c();
    let ct = c * t;
    let slowest = config.slowest_rate();
    let cutoff = quad.r1_cutoff.unwrap_or(-(ct + 40.0 * c / slowest));
    let tail_length = c / config.pulse.delta1().min(config.pulse.delta2());
    let prefactor = probability_prefactor(config);
    let fastest = config
        .atom
        .gamma()
        .max(config.pulse.delta1())
        .max(config.pulse.delta2());
    let min_len = 0.25 * c / fastest;
    let breaks = |a: f64, b: f64| geometric_breaks(a, b, min_len, BREAK_RATIO);

    // Tolerances are set on p itself, so rescale them to integrand units.
    let outer_opts = QuadratureOptions {
        abs_tol: quad.abs_tol / prefactor,
        ..*quad
    };
    let inner_opts = QuadratureOptions {
        abs_tol: quad.abs_tol / (prefactor * ct),
        ..*quad
    };

    let mut failure: Option<Error> = None;
    let outer = integrate_panels(
        |r2: f64| {
            let slice = shape.at(t - r2 / c);
            let mut inner_error = 0.0;
            let mut terms = Vector([0.0; 3]);

            // r1 < r2: only the direct term is supported.
            if cutoff < r2 {
                match integrate_panels(
                    |r1: f64| {
                        let a = slice.direct(r1 - r2);
                        a * a
                    },
                    &breaks(cutoff, r2),
                    &inner_opts,
                ) {
                    Ok(e) => {
                        terms.0[0] += e.value;
                        // |ψ^A1|² decays at least like exp(Δ_min x / c) towards −∞.
                        let edge = slice.direct(cutoff - r2);
                        inner_error += e.error + edge * edge * tail_length;
                    }
                    Err(err) => {
                        failure.get_or_insert(err);
                    }
                }
            }

            match integrate_panels(
                |r1: f64| {
                    let a = slice.direct(r1 - r2);
                    let b = slice.stimulated(r1 - r2);
                    Vector([a * a, b * b, 2.0 * a * b])
                },
                &breaks(r2, ct),
                &inner_opts,
            ) {
                Ok(e) => {
                    terms = terms + e.value;
                    inner_error += e.error;
                }
                Err(err) => {
                    failure.get_or_insert(err);
                }
            }
            Carried { terms, inner_error }
        },
        &breaks(0.0, ct),
        &outer_opts,
    );
    if let Some(err) = failure {
        return Err(err);
    }
    let outer = outer?;
    let [direct, stimulated, cross] = outer.value.terms.0;
    let terms = TermBreakdown {
        direct: prefactor * direct,
        stimulated: prefactor * stimulated,
        cross: prefactor * cross,
    };
    Ok(TransitionResult {
        p: terms.total(),
        t: horizon,
        estimated_error: prefactor * (3.0 * outer.error + outer.value.inner_error.abs()),
        terms,
    })
}

/// Change between successive horizons below which `p` counts as converged.
pub const ASYMPTOTE_TOLERANCE: f64 = 1e-6;
/// Maximum number of horizon doublings.
pub const MAX_DOUBLINGS: usize = 20;

/// Long-time limit `p_{a→b}(∞)`, found by doubling the horizon from
/// `T₀ = 10 max(1/Γ, 1/Δ1, 1/Δ2)` until successive values agree.
pub fn transition_probability_asymptotic(
    config: &ModelConfig,
    quad: &QuadratureOptions,
) -> Result<TransitionResult> {
    let t0 = 10.0 / config.slowest_rate();
    let mut horizon = t0;
    let mut previous = transition_probability(horizon, config, quad)?;
    let mut last_change = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        horizon *= 2.0;
        let next = transition_probability(horizon, config, quad)?;
        last_change = (next.p - previous.p).abs();
        if last_change < ASYMPTOTE_TOLERANCE {
            return Ok(TransitionResult {
                t: Horizon::Asymptotic(horizon),
                estimated_error: next.estimated_error + last_change,
                ..next
            });
        }
        previous = next;
    }
    Err(Error::Asymptote {
        horizons: MAX_DOUBLINGS + 1,
        last_change,
        last_value: previous.p,
    })
}

/// Raman probability for one exponential photon of linewidth `delta`:
/// `r_Γ / (1 + Δ/Γ)`. `delta = 0` gives the monochromatic limit `r_Γ`.
pub fn single_photon_probability(delta: f64, atom: &AtomParams) -> Result<f64> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::domain(
            "delta",
            format!("must be finite and >= 0, got {delta}"),
        ));
    }
    Ok(atom.branching_ratio() / (1.0 + delta / atom.gamma()))
}

/// Cascaded model for given linewidths: `p1 + (1 − p1) p2`.
pub fn cascaded_from_linewidths(atom: &AtomParams, delta1: f64, delta2: f64) -> Result<f64> {
    let p1 = single_photon_probability(delta1, atom)?;
    let p2 = single_photon_probability(delta2, atom)?;
    Ok(p1 + (1.0 - p1) * p2)
}

/// Two consecutive, independent single-photon scatterings.
pub fn cascaded_probability(config: &ModelConfig) -> f64 {
    cascaded_from_linewidths(&config.atom, config.pulse.delta1(), config.pulse.delta2())
        .expect("pulse linewidths are validated at construction")
}

/// Final population of `|b⟩` for an atom that starts as the mixture
/// `p_a0 |a⟩⟨a| + (1 − p_a0) |b⟩⟨b|`.
pub fn purified_population(
    p_a0: f64,
    config: &ModelConfig,
    quad: &QuadratureOptions,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_a0) {
        return Err(Error::domain(
            "p_a0",
            format!("must lie in [0, 1], got {p_a0}"),
        ));
    }
    if p_a0 == 0.0 {
        return Ok(1.0);
    }
    let p = transition_probability_asymptotic(config, quad)?;
    Ok((1.0 - p_a0) + p_a0 * p.p)
}
