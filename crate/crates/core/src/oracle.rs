//! Brute-force reference: the six two-excitation amplitude equations on a
//! finite, uniformly spaced frequency grid, with no Wigner–Weisskopf step.
//!
//! Each polarization gets `M` modes spanning `±W` around its own transition
//! (`A` modes around `ω_a`, `B` modes around `ω_b = ω_a − δ_ab`). The grid
//! density `ϱ_grid = 1/δω` sets the per-mode couplings `g_k = sqrt(Γ_k δω / 2π)`,
//! so the discrete model tends to the continuum rates as `δω → 0`. On this
//! grid every real-space amplitude is periodic with length `2πc/δω`; results
//! are only meaningful before emitted light wraps back onto the atom.
//!
//! Amplitudes are stored in the frame rotating at `ω_a` (per excitation).
//! Integration runs in the full interaction picture of `H_S + H_E` with
//! fixed-step RK4, so the free phases are exact and the step size is set by
//! the couplings rather than by the band edge.
//!
//! Two-photon arrays are dense `M × M`, row-major. Mixed-polarization arrays
//! `φ^AB` and `φ^BA` are indexed `[A photon, B photon]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::amplitudes::ComplexAmplitude;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, PulseParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Smallest grid accepted by [`ModeGrid::new`].
pub const MIN_MODES: usize = 16;
/// Fraction of the continuum pulse norm a grid must hold by default.
pub const DEFAULT_MIN_CAPTURE: f64 = 0.98;

/// Uniform frequency grid for one polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeGrid {
    /// Offset of the grid midpoint from the transition it surrounds.
    pub center: f64,
    pub half_width: f64,
    pub n_modes: usize,
}

impl ModeGrid {
    pub fn new(half_width: f64, n_modes: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::domain(
                "half_width",
                format!("must be positive, got {half_width}"),
            ));
        }
        if n_modes < MIN_MODES {
            return Err(Error::domain(
                "n_modes",
                format!("need at least {MIN_MODES} modes, got {n_modes}"),
            ));
        }
        Ok(Self {
            center: 0.0,
            half_width,
            n_modes,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_modes - 1) as f64
    }

    /// Mode density implied by the spacing.
    pub fn density(&self) -> f64 {
        1.0 / self.spacing()
    }

    /// Time after which light emitted at the atom returns to it.
    pub fn recurrence_time(&self) -> f64 {
        2.0 * PI / self.spacing()
    }

    /// Detunings of the modes from the grid's transition.
    pub fn detunings(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_modes)
            .map(|j| self.center - self.half_width + h * j as f64)
            .collect()
    }

    /// Recommendations the grid misses for this configuration, if any.
    pub fn warnings(&self, config: &ModelConfig) -> Vec<String> {
        let fastest = config
            .atom
            .gamma()
            .max(config.pulse.delta1())
            .max(config.pulse.delta2());
        let mut out = Vec::new();
        if self.half_width < 20.0 * fastest {
            out.push(format!(
                "half width {} is below 20 x max(Γ, Δ1, Δ2) = {}",
                self.half_width,
                20.0 * fastest
            ));
        }
        if self.spacing() > config.atom.gamma() / 10.0 {
            out.push(format!(
                "mode spacing {:.4} exceeds Γ/10 = {:.4}",
                self.spacing(),
                config.atom.gamma() / 10.0
            ));
        }
        out
    }
}

/// Mode amplitudes of the two-excitation state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoExcitationState {
    n: usize,
    pub t: f64,
    pub psi_a: Vec<Complex64>,
    pub psi_b: Vec<Complex64>,
    pub phi_aa: Vec<Complex64>,
    pub phi_bb: Vec<Complex64>,
    pub phi_ab: Vec<Complex64>,
    pub phi_ba: Vec<Complex64>,
}

impl TwoExcitationState {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            t: 0.0,
            psi_a: vec![ZERO; n],
            psi_b: vec![ZERO; n],
            phi_aa: vec![ZERO; n * n],
            phi_bb: vec![ZERO; n * n],
            phi_ab: vec![ZERO; n * n],
            phi_ba: vec![ZERO; n * n],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n
    }

    /// `⟨ψ|ψ⟩` with the expansion's multiplicities: symmetric same-polarization
    /// pairs count twice, mixed-polarization pairs four times.
    pub fn norm(&self) -> f64 {
        sum_sq(&self.psi_a)
            + sum_sq(&self.psi_b)
            + 2.0 * (sum_sq(&self.phi_aa) + sum_sq(&self.phi_bb))
            + 4.0 * (sum_sq(&self.phi_ab) + sum_sq(&self.phi_ba))
    }

    /// Population of `|b⟩`.
    pub fn p_ab(&self) -> f64 {
        2.0 * sum_sq(&self.phi_bb) + 4.0 * sum_sq(&self.phi_ba)
    }

    /// Population of `|e⟩`.
    pub fn excited_population(&self) -> f64 {
        sum_sq(&self.psi_a) + sum_sq(&self.psi_b)
    }

    /// Largest `|φ_{jk} − φ_{kj}|` over the two same-polarization arrays.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for arr in [&self.phi_aa, &self.phi_bb] {
            for j in 0..n {
                for k in (j + 1)..n {
                    worst = worst.max((arr[j * n + k] - arr[k * n + j]).norm());
                }
            }
        }
        worst
    }

    fn arrays(&self) -> [&Vec<Complex64>; 6] {
        [
            &self.psi_a,
            &self.psi_b,
            &self.phi_aa,
            &self.phi_bb,
            &self.phi_ab,
            &self.phi_ba,
        ]
    }

    fn arrays_mut(&mut self) -> [&mut Vec<Complex64>; 6] {
        [
            &mut self.psi_a,
            &mut self.psi_b,
            &mut self.phi_aa,
            &mut self.phi_bb,
            &mut self.phi_ab,
            &mut self.phi_ba,
        ]
    }

    /// Largest component-wise distance to `other`.
    pub fn max_difference(&self, other: &Self) -> f64 {
        self.arrays()
            .iter()
            .zip(other.arrays())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|a| a.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// `self += h * rhs`, array by array.
    #[cfg(test)]
    fn axpy(&mut self, h: f64, rhs: &Self) {
        for (dst, src) in self.arrays_mut().into_iter().zip(rhs.arrays()) {
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += s * h;
            }
        }
    }
}

fn sum_sq(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Frequencies (relative to `ω_a`) and couplings of the discretized model.
#[derive(Debug, Clone)]
pub(crate) struct ModeSystem {
    /// `A` mode frequencies.
    a: Vec<f64>,
    /// `B` mode frequencies.
    b: Vec<f64>,
    delta_ab: f64,
    g_a: f64,
    g_b: f64,
}

impl ModeSystem {
    pub(crate) fn new(config: &ModelConfig, grid: &ModeGrid) -> Self {
        let nu = grid.detunings();
        let delta_ab = config.atom.delta_ab();
        let dw = grid.spacing();
        Self {
            a: nu.clone(),
            b: nu.iter().map(|v| v - delta_ab).collect(),
            delta_ab,
            g_a: (config.atom.gamma_a() * dw / (2.0 * PI)).sqrt(),
            g_b: (config.atom.gamma_b() * dw / (2.0 * PI)).sqrt(),
        }
    }

    #[cfg(test)]
    pub(crate) fn from_parts(a: Vec<f64>, b: Vec<f64>, delta_ab: f64, g_a: f64, g_b: f64) -> Self {
        Self {
            a,
            b,
            delta_ab,
            g_a,
            g_b,
        }
    }

    fn n(&self) -> usize {
        self.a.len()
    }

    /// Free energies of each amplitude, in the rotating frame.
    fn energies(&self) -> [Box<dyn Fn(usize, usize) -> f64 + '_>; 6] {
        let d = self.delta_ab;
        [
            Box::new(move |j, _| self.a[j]),
            Box::new(move |j, _| self.b[j]),
            Box::new(move |j, k| self.a[j] + self.a[k]),
            Box::new(move |j, k| self.b[j] + self.b[k] + d),
            Box::new(move |j, k| self.a[j] + self.b[k]),
            Box::new(move |j, k| self.a[j] + self.b[k] + d),
        ]
    }

    /// Multiplies every amplitude by `exp(sign · i E t)`.
    fn rotate(&self, state: &mut TwoExcitationState, t: f64, sign: f64) {
        let n = self.n();
        let energies = self.energies();
        for (idx, arr) in state.arrays_mut().into_iter().enumerate() {
            let e = &energies[idx];
            if arr.len() == n {
                for (j, z) in arr.iter_mut().enumerate() {
                    *z *= Complex64::from_polar(1.0, sign * e(j, 0) * t);
                }
            } else {
                for j in 0..n {
                    for k in 0..n {
                        arr[j * n + k] *= Complex64::from_polar(1.0, sign * e(j, k) * t);
                    }
                }
            }
        }
    }

    /// Right-hand side of the Schrödinger equation in the rotating frame.
    pub(crate) fn schrodinger_rhs(&self, s: &TwoExcitationState, out: &mut TwoExcitationState) {
        let n = self.n();
        let (ga, gb, d) = (self.g_a, self.g_b, self.delta_ab);
        let i = Complex64::new(0.0, 1.0);
        for j in 0..n {
            let row = j * n..(j + 1) * n;
            let aa: Complex64 = s.phi_aa[row.clone()].iter().sum();
            let ba: Complex64 = s.phi_ba[row.clone()].iter().sum();
            out.psi_a[j] = -i * self.a[j] * s.psi_a[j] - 2.0 * (ga * aa + gb * ba);
            let bb: Complex64 = s.phi_bb[row].iter().sum();
            let ab: Complex64 = (0..n).map(|k| s.phi_ab[k * n + j]).sum();
            out.psi_b[j] = -i * self.b[j] * s.psi_b[j] - 2.0 * (gb * bb + ga * ab);
        }
        for j in 0..n {
            for k in 0..n {
                let jk = j * n + k;
                out.phi_aa[jk] = -i * (self.a[j] + self.a[k]) * s.phi_aa[jk]
                    + 0.5 * ga * (s.psi_a[j] + s.psi_a[k]);
                out.phi_bb[jk] = -i * (self.b[j] + self.b[k] + d) * s.phi_bb[jk]
                    + 0.5 * gb * (s.psi_b[j] + s.psi_b[k]);
                out.phi_ab[jk] =
                    -i * (self.a[j] + self.b[k]) * s.phi_ab[jk] + 0.5 * ga * s.psi_b[k];
                out.phi_ba[jk] =
                    -i * (self.a[j] + self.b[k] + d) * s.phi_ba[jk] + 0.5 * gb * s.psi_a[j];
            }
        }
    }

    /// Interaction-picture right-hand side at time `t`.
    #[cfg(test)]
    fn interaction_rhs(
        &self,
        t: f64,
        s: &TwoExcitationState,
        out: &mut TwoExcitationState,
        ph: &mut Phases,
    ) {
        let n = self.n();
        let (ga, gb) = (self.g_a, self.g_b);
        ph.update(self, t);
        let (pa, pb) = (&ph.a, &ph.b);
        for j in 0..n {
            let row = j * n..(j + 1) * n;
            let aa: Complex64 = s.phi_aa[row.clone()]
                .iter()
                .zip(pa)
                .map(|(z, p)| z * p.conj())
                .sum();
            let ba: Complex64 = s.phi_ba[row.clone()]
                .iter()
                .zip(pb)
                .map(|(z, p)| z * p.conj())
                .sum();
            out.psi_a[j] = -2.0 * (ga * aa + gb * ba);
            let bb: Complex64 = s.phi_bb[row]
                .iter()
                .zip(pb)
                .map(|(z, p)| z * p.conj())
                .sum();
            let ab: Complex64 = (0..n).map(|k| s.phi_ab[k * n + j] * pa[k].conj()).sum();
            out.psi_b[j] = -2.0 * (gb * bb + ga * ab);
        }
        let (ha, hb) = (0.5 * ga, 0.5 * gb);
        for j in 0..n {
            let (psa_j, psb_j) = (s.psi_a[j], s.psi_b[j]);
            let (pa_j, pb_j) = (pa[j], pb[j]);
            let base = j * n;
            for k in 0..n {
                let jk = base + k;
                out.phi_aa[jk] = ha * (pa[k] * psa_j + pa_j * s.psi_a[k]);
                out.phi_bb[jk] = hb * (pb[k] * psb_j + pb_j * s.psi_b[k]);
                out.phi_ab[jk] = ha * pa_j * s.psi_b[k];
                out.phi_ba[jk] = hb * pb[k] * psa_j;
            }
        }
    }
}

/// `exp(i a_k t)` and `exp(i (b_k + δ_ab) t)` for the current stage time.
#[cfg(test)]
struct Phases {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
}

#[cfg(test)]
impl Phases {
    fn new(n: usize) -> Self {
        Self {
            a: vec![ZERO; n],
            b: vec![ZERO; n],
        }
    }

    fn update(&mut self, sys: &ModeSystem, t: f64) {
        for (p, w) in self.a.iter_mut().zip(&sys.a) {
            *p = Complex64::from_polar(1.0, w * t);
        }
        for (p, w) in self.b.iter_mut().zip(&sys.b) {
            *p = Complex64::from_polar(1.0, (w + sys.delta_ab) * t);
        }
    }
}

/// Mode amplitude of `Θ(−r) exp((Δ/2 + iν) r / c)` in the convention
/// `f(r) = Σ_ω F(ω) e^{iωr/c}` with density `rho`.
fn lorentzian(omega: f64, delta: f64, detuning: f64, rho: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) / (Complex64::new(0.5 * delta, -(omega - detuning)) * (2.0 * PI * rho))
}

/// Continuum normalization of the symmetrized pair, allowing distinct
/// carrier detunings.
fn pair_normalization(pulse: &PulseParams, rho: f64) -> f64 {
    let (d1, d2) = (pulse.delta1(), pulse.delta2());
    let dnu = pulse.detuning2() - pulse.detuning1();
    let overlap = 4.0 * d1 * d2 / ((d1 + d2).powi(2) + 4.0 * dnu * dnu);
    PI * rho * (d1 * d2 / (1.0 + overlap)).sqrt()
}

/// Discretized initial state `|a, 2_AA⟩`, renormalized to unit norm.
/// Fails if the grid holds less than `min_capture` of the continuum norm.
pub fn init_state_with_capture(
    config: &ModelConfig,
    grid: &ModeGrid,
    min_capture: f64,
) -> Result<TwoExcitationState> {
    let n = grid.n_modes;
    let rho = grid.density();
    let nu = grid.detunings();
    let p = &config.pulse;
    let f1: Vec<Complex64> = nu
        .iter()
        .map(|&w| lorentzian(w, p.delta1(), p.detuning1(), rho))
        .collect();
    let f2: Vec<Complex64> = nu
        .iter()
        .map(|&w| lorentzian(w, p.delta2(), p.detuning2(), rho))
        .collect();
    let norm_const = pair_normalization(p, rho);

    let mut state = TwoExcitationState::zeros(n);
    for j in 0..n {
        for k in 0..n {
            state.phi_aa[j * n + k] = (f1[j] * f2[k] + f1[k] * f2[j]) * norm_const;
        }
    }
    let captured = state.norm();
    if captured < min_capture {
        return Err(Error::GridCapture {
            captured,
            required: min_capture,
        });
    }
    let scale = captured.sqrt().recip();
    for z in state.phi_aa.iter_mut() {
        *z *= scale;
    }
    Ok(state)
}

/// [`init_state_with_capture`] with [`DEFAULT_MIN_CAPTURE`].
pub fn init_state(config: &ModelConfig, grid: &ModeGrid) -> Result<TwoExcitationState> {
    init_state_with_capture(config, grid, DEFAULT_MIN_CAPTURE)
}

/// Time derivative of `state` under the discretized Hamiltonian.
pub fn rhs(
    state: &TwoExcitationState,
    config: &ModelConfig,
    grid: &ModeGrid,
) -> TwoExcitationState {
    let sys = ModeSystem::new(config, grid);
    assert_eq!(state.n_modes(), grid.n_modes, "state and grid sizes differ");
    let mut out = TwoExcitationState::zeros(state.n_modes());
    out.t = state.t;
    sys.schrodinger_rhs(state, &mut out);
    out
}

/// Time series from one oracle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub times: Vec<f64>,
    pub p_ab: Vec<f64>,
    pub norm: Vec<f64>,
    pub excited_pop: Vec<f64>,
    /// `max |norm − 1|` over every step, not only the samples.
    pub norm_drift: f64,
}

impl OracleReport {
    fn push(&mut self, s: &TwoExcitationState) {
        self.times.push(s.t);
        self.p_ab.push(s.p_ab());
        self.norm.push(s.norm());
        self.excited_pop.push(s.excited_population());
    }

    /// Writes the samples as CSV with columns `t,p_ab,norm,excited_pop`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,p_ab,norm,excited_pop")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                self.times[i], self.p_ab[i], self.norm[i], self.excited_pop[i]
            )?;
        }
        Ok(())
    }
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stepping {
    pub t_end: f64,
    /// Step size; negative steps integrate backwards.
    pub dt: f64,
    /// Record a sample every this many steps (the first and last step are
    /// always recorded).
    pub sample_every: usize,
}

/// Largest `|dt| · W` accepted: the fastest phase turns at most this much
/// per step.
pub const MAX_PHASE_PER_STEP: f64 = 0.25;
/// Largest `|dt| · Γ` accepted.
pub const MAX_DECAY_PER_STEP: f64 = 0.1;

impl Stepping {
    fn validate(
        &self,
        state: &TwoExcitationState,
        config: &ModelConfig,
        grid: &ModeGrid,
    ) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(Error::domain("dt", "must be finite and nonzero"));
        }
        let span = self.t_end - state.t;
        if !span.is_finite() || span * self.dt < 0.0 {
            return Err(Error::domain("t_end", "must lie in the direction of dt"));
        }
        let fastest_phase = grid.half_width + grid.center.abs();
        if self.dt.abs() * fastest_phase > MAX_PHASE_PER_STEP {
            return Err(Error::domain(
                "dt",
                format!(
                    "|dt| * W = {:.3} exceeds {MAX_PHASE_PER_STEP}",
                    self.dt.abs() * fastest_phase
                ),
            ));
        }
        if self.dt.abs() * config.atom.gamma() > MAX_DECAY_PER_STEP {
            return Err(Error::domain(
                "dt",
                format!(
                    "|dt| * Γ = {:.3} exceeds {MAX_DECAY_PER_STEP}",
                    self.dt.abs() * config.atom.gamma()
                ),
            ));
        }
        if self.sample_every == 0 {
            return Err(Error::domain("sample_every", "must be at least 1"));
        }
        if state.n_modes() != grid.n_modes {
            return Err(Error::domain("state", "mode count does not match the grid"));
        }
        Ok((span / self.dt).round().max(0.0) as usize)
    }
}

/// Fixed-step RK4 from `state.t` to `stepping.t_end`.
pub fn integrate(
    state: TwoExcitationState,
    config: &ModelConfig,
    grid: &ModeGrid,
    stepping: &Stepping,
) -> Result<(OracleReport, TwoExcitationState)> {
    let steps = stepping.validate(&state, config, grid)?;
    let sys = ModeSystem::new(config, grid);
    run_rk4(&sys, state, steps, stepping.dt, stepping.sample_every)
}

pub(crate) fn run_rk4(
    sys: &ModeSystem,
    mut state: TwoExcitationState,
    steps: usize,
    dt: f64,
    sample_every: usize,
) -> Result<(OracleReport, TwoExcitationState)> {
    let t0 = state.t;
    let mut report = OracleReport {
        times: Vec::new(),
        p_ab: Vec::new(),
        norm: Vec::new(),
        excited_pop: Vec::new(),
        norm_drift: (state.norm() - 1.0).abs(),
    };
    report.push(&state);

    // Interaction picture: ξ = exp(iEt) x. Populations are unchanged by the
    // rotation, so samples are taken directly from ξ.
    sys.rotate(&mut state, t0, 1.0);
    let mut work = StepWork::new(sys.n());
    for step in 1..=steps {
        let t = t0 + dt * (step - 1) as f64;
        sys.rk4_step(&mut state, t, dt, &mut work);
        state.t = t0 + dt * step as f64;

        let norm = state.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite { t: state.t });
        }
        report.norm_drift = report.norm_drift.max((norm - 1.0).abs());
        if step % sample_every == 0 || step == steps {
            report.push(&state);
        }
    }
    let t_final = state.t;
    sys.rotate(&mut state, t_final, -1.0);
    if !state.is_finite() {
        return Err(Error::NonFinite { t: state.t });
    }
    Ok((report, state))
}

/// Phase factors at the three distinct RK4 stage times.
const STAGE_TIMES: [f64; 3] = [0.0, 0.5, 1.0];
/// Stage to time slot, stage offsets and weights of classical RK4.
const STAGE_SLOT: [usize; 4] = [0, 1, 1, 2];
const STAGE_OFFSET: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
const STAGE_WEIGHT: [f64; 4] = [1.0, 2.0, 2.0, 1.0];

/// Scratch space for [`ModeSystem::rk4_step`].
struct StepWork {
    /// `exp(i a_k τ)` and `exp(i (b_k + δ_ab) τ)` per time slot.
    pa: [Vec<Complex64>; 3],
    pb: [Vec<Complex64>; 3],
    /// Projections of the two-photon arrays onto the phases, per time slot.
    s_aa: [Vec<Complex64>; 3],
    s_ba: [Vec<Complex64>; 3],
    s_bb: [Vec<Complex64>; 3],
    s_ab: [Vec<Complex64>; 3],
    /// Weighted stage values of ψ^A and ψ^B, per time slot.
    u: [Vec<Complex64>; 3],
    v: [Vec<Complex64>; 3],
}

impl StepWork {
    fn new(n: usize) -> Self {
        let z = || std::array::from_fn(|_| vec![ZERO; n]);
        Self {
            pa: z(),
            pb: z(),
            s_aa: z(),
            s_ba: z(),
            s_bb: z(),
            s_ab: z(),
            u: z(),
            v: z(),
        }
    }
}

impl ModeSystem {
    /// One classical RK4 step of the interaction-picture equations.
    ///
    /// Every two-photon derivative is an outer product of a one-photon
    /// amplitude with a phase vector, so the stage projections of the
    /// two-photon arrays follow from projections of the step-start arrays plus
    /// `O(M)` corrections, and the final update is a low-rank sum. The result
    /// equals the textbook four-stage scheme up to rounding.
    fn rk4_step(&self, st: &mut TwoExcitationState, t: f64, h: f64, w: &mut StepWork) {
        let n = self.n();
        let (ga, gb) = (self.g_a, self.g_b);
        let (ha, hb) = (0.5 * ga, 0.5 * gb);

        for (m, frac) in STAGE_TIMES.iter().enumerate() {
            let tau = t + frac * h;
            for k in 0..n {
                w.pa[m][k] = Complex64::from_polar(1.0, self.a[k] * tau);
                w.pb[m][k] = Complex64::from_polar(1.0, (self.b[k] + self.delta_ab) * tau);
            }
        }

        self.project(st, w);

        let mut x_a = st.psi_a.clone();
        let mut x_b = st.psi_b.clone();
        let mut k_a = vec![ZERO; n];
        let mut k_b = vec![ZERO; n];
        let mut d_a = vec![ZERO; n];
        let mut d_b = vec![ZERO; n];
        for slot in w.u.iter_mut().chain(w.v.iter_mut()) {
            slot.fill(ZERO);
        }

        for stage in 0..4 {
            let m = STAGE_SLOT[stage];
            if stage == 0 {
                for j in 0..n {
                    k_a[j] = -2.0 * (ga * w.s_aa[m][j] + gb * w.s_ba[m][j]);
                    k_b[j] = -2.0 * (gb * w.s_bb[m][j] + ga * w.s_ab[m][j]);
                }
            } else {
                let a = STAGE_OFFSET[stage] * h;
                let mp = STAGE_SLOT[stage - 1];
                let cross = |p: &[Complex64], q: &[Complex64]| -> Complex64 {
                    p.iter().zip(q).map(|(x, y)| x.conj() * y).sum()
                };
                let ca = cross(&w.pa[m], &w.pa[mp]);
                let cb = cross(&w.pb[m], &w.pb[mp]);
                let da = cross(&w.pa[m], &x_a);
                let db = cross(&w.pb[m], &x_b);
                for j in 0..n {
                    let s_aa = w.s_aa[m][j] + a * ha * (ca * x_a[j] + w.pa[mp][j] * da);
                    let s_ba = w.s_ba[m][j] + a * hb * cb * x_a[j];
                    let s_bb = w.s_bb[m][j] + a * hb * (cb * x_b[j] + w.pb[mp][j] * db);
                    let s_ab = w.s_ab[m][j] + a * ha * ca * x_b[j];
                    // The previous stage's ψ is no longer needed once used above.
                    x_a[j] = st.psi_a[j] + a * k_a[j];
                    x_b[j] = st.psi_b[j] + a * k_b[j];
                    k_a[j] = -2.0 * (ga * s_aa + gb * s_ba);
                    k_b[j] = -2.0 * (gb * s_bb + ga * s_ab);
                }
            }
            let weight = STAGE_WEIGHT[stage];
            for j in 0..n {
                w.u[m][j] += weight * x_a[j];
                w.v[m][j] += weight * x_b[j];
                d_a[j] += weight * k_a[j];
                d_b[j] += weight * k_b[j];
            }
        }

        let c = h / 6.0;
        for j in 0..n {
            st.psi_a[j] += c * d_a[j];
            st.psi_b[j] += c * d_b[j];
        }
        self.low_rank_update(st, w, c);
    }

    /// Projections of the step-start arrays at each time slot:
    /// `Σ_k conj(p_k) X_{jk}` (row sums) and, for `φ^AB`, column sums.
    fn project(&self, st: &TwoExcitationState, w: &mut StepWork) {
        let n = self.n();
        for m in 0..3 {
            w.s_ab[m].fill(ZERO);
        }
        let conj_a: [Vec<Complex64>; 3] =
            std::array::from_fn(|m| w.pa[m].iter().map(|z| z.conj()).collect());
        let conj_b: [Vec<Complex64>; 3] =
            std::array::from_fn(|m| w.pb[m].iter().map(|z| z.conj()).collect());
        for j in 0..n {
            let row = j * n..(j + 1) * n;
            let (aa, ba, bb, ab) = (
                &st.phi_aa[row.clone()],
                &st.phi_ba[row.clone()],
                &st.phi_bb[row.clone()],
                &st.phi_ab[row],
            );
            for m in 0..3 {
                let (qa, qb) = (&conj_a[m], &conj_b[m]);
                let mut acc_aa = ZERO;
                let mut acc_ba = ZERO;
                let mut acc_bb = ZERO;
                for k in 0..n {
                    acc_aa += qa[k] * aa[k];
                    acc_ba += qb[k] * ba[k];
                    acc_bb += qb[k] * bb[k];
                }
                w.s_aa[m][j] = acc_aa;
                w.s_ba[m][j] = acc_ba;
                w.s_bb[m][j] = acc_bb;
                let qaj = qa[j];
                for (acc, x) in w.s_ab[m].iter_mut().zip(ab) {
                    *acc += qaj * x;
                }
            }
        }
    }

    /// Adds the weighted stage derivatives of the two-photon arrays.
    fn low_rank_update(&self, st: &mut TwoExcitationState, w: &StepWork, c: f64) {
        let n = self.n();
        let (ca, cb) = (0.5 * self.g_a * c, 0.5 * self.g_b * c);
        let scale = |src: &[Vec<Complex64>; 3], f: f64| -> [Vec<Complex64>; 3] {
            std::array::from_fn(|m| src[m].iter().map(|z| z * f).collect())
        };
        let (u_a, u_b) = (scale(&w.u, ca), scale(&w.u, cb));
        let (v_a, v_b) = (scale(&w.v, ca), scale(&w.v, cb));
        for j in 0..n {
            let base = j * n;
            let aa = &mut st.phi_aa[base..base + n];
            let bb = &mut st.phi_bb[base..base + n];
            let ab = &mut st.phi_ab[base..base + n];
            let ba = &mut st.phi_ba[base..base + n];
            for m in 0..3 {
                let (pa, pb) = (&w.pa[m], &w.pb[m]);
                let (uaj, paj, vbj, pbj, ubj) = (u_a[m][j], pa[j], v_b[m][j], pb[j], u_b[m][j]);
                let (ua, vb, va) = (&u_a[m], &v_b[m], &v_a[m]);
                for k in 0..n {
                    aa[k] += pa[k] * uaj + paj * ua[k];
                    bb[k] += pb[k] * vbj + pbj * vb[k];
                    ab[k] += paj * va[k];
                    ba[k] += pb[k] * ubj;
                }
            }
        }
    }
}

/// Plain RK4 on the interaction-picture equations; reference for the
/// structured stepper.
#[cfg(test)]
pub(crate) fn run_rk4_reference(
    sys: &ModeSystem,
    mut state: TwoExcitationState,
    steps: usize,
    dt: f64,
    sample_every: usize,
) -> Result<(OracleReport, TwoExcitationState)> {
    let n = sys.n();
    let t0 = state.t;
    let mut report = OracleReport {
        times: Vec::new(),
        p_ab: Vec::new(),
        norm: Vec::new(),
        excited_pop: Vec::new(),
        norm_drift: 0.0,
    };
    let initial_norm = state.norm();
    report.norm_drift = (initial_norm - 1.0).abs();
    report.push(&state);

    // Interaction picture: ξ = exp(iEt) x.
    sys.rotate(&mut state, t0, 1.0);
    let mut k1 = TwoExcitationState::zeros(n);
    let mut k2 = TwoExcitationState::zeros(n);
    let mut k3 = TwoExcitationState::zeros(n);
    let mut k4 = TwoExcitationState::zeros(n);
    let mut tmp = TwoExcitationState::zeros(n);
    let mut phases = Phases::new(n);

    for step in 1..=steps {
        let t = t0 + dt * (step - 1) as f64;
        sys.interaction_rhs(t, &state, &mut k1, &mut phases);
        copy_into(&mut tmp, &state);
        tmp.axpy(0.5 * dt, &k1);
        sys.interaction_rhs(t + 0.5 * dt, &tmp, &mut k2, &mut phases);
        copy_into(&mut tmp, &state);
        tmp.axpy(0.5 * dt, &k2);
        sys.interaction_rhs(t + 0.5 * dt, &tmp, &mut k3, &mut phases);
        copy_into(&mut tmp, &state);
        tmp.axpy(dt, &k3);
        sys.interaction_rhs(t + dt, &tmp, &mut k4, &mut phases);
        state.axpy(dt / 6.0, &k1);
        state.axpy(dt / 3.0, &k2);
        state.axpy(dt / 3.0, &k3);
        state.axpy(dt / 6.0, &k4);
        state.t = t0 + dt * step as f64;

        let norm = state.norm();
        if !norm.is_finite() {
            return Err(Error::NonFinite { t: state.t });
        }
        report.norm_drift = report.norm_drift.max((norm - 1.0).abs());
        if step % sample_every == 0 || step == steps {
            let mut snapshot = state.clone();
            let ts = snapshot.t;
            sys.rotate(&mut snapshot, ts, -1.0);
            report.push(&snapshot);
        }
    }
    let t_final = state.t;
    sys.rotate(&mut state, t_final, -1.0);
    if !state.is_finite() {
        return Err(Error::NonFinite { t: state.t });
    }
    Ok((report, state))
}

#[cfg(test)]
fn copy_into(dst: &mut TwoExcitationState, src: &TwoExcitationState) {
    for (d, s) in dst.arrays_mut().into_iter().zip(src.arrays()) {
        d.copy_from_slice(s);
    }
    dst.t = src.t;
}

/// `ψ^A(r, t) = Σ_ω ψ^A_ω(t) e^{iωr/c}` on the grid. The result uses the
/// grid's mode density, so compare it with closed forms evaluated at
/// `ϱ = 1/δω`.
pub fn reconstruct_real_space(
    state: &TwoExcitationState,
    grid: &ModeGrid,
    config: &ModelConfig,
    r: f64,
) -> ComplexAmplitude {
    let c = config.c();
    grid.detunings()
        .iter()
        .zip(&state.psi_a)
        .map(|(w, z)| z * Complex64::from_polar(1.0, w * r / c))
        .sum()
}

/// `φ^AA(r1, r2, t)` from the grid amplitudes.
pub fn reconstruct_pair(
    state: &TwoExcitationState,
    grid: &ModeGrid,
    config: &ModelConfig,
    r1: f64,
    r2: f64,
) -> ComplexAmplitude {
    let c = config.c();
    let nu = grid.detunings();
    let n = grid.n_modes;
    let e1: Vec<Complex64> = nu
        .iter()
        .map(|w| Complex64::from_polar(1.0, w * r1 / c))
        .collect();
    let e2: Vec<Complex64> = nu
        .iter()
        .map(|w| Complex64::from_polar(1.0, w * r2 / c))
        .collect();
    let mut acc = ZERO;
    for (row, w1) in state.phi_aa.chunks_exact(n).zip(&e1) {
        let inner: Complex64 = row.iter().zip(&e2).map(|(p, w2)| p * w2).sum();
        acc += inner * w1;
    }
    acc
}
