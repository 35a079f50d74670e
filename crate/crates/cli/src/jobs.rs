//! The computations behind each subcommand.

use std::time::Instant;

use clap::ValueEnum;
use rayon::prelude::*;

use lambda2p::amplitudes::{AmplitudeField, FieldKind, PositionGrid};
use lambda2p::oracle::{init_state, integrate, ModeGrid, OracleReport, Stepping};
use lambda2p::probability::{
    cascaded_probability, transition_probability, transition_probability_asymptotic,
    TransitionResult,
};
use lambda2p::{AtomParams, ModelConfig, PulseParams, QuadratureOptions};

use crate::error::CliError;
use crate::table::{Cell, Table};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "LAMBDA2P_THREADS";

/// Worker pool sized by [`THREADS_ENV`] (all cores when unset).
pub fn worker_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::config(format!(
                "{THREADS_ENV} must be a positive integer, got `{raw}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))
}

fn evaluate(
    cfg: &ModelConfig,
    horizon: Option<f64>,
    quad: &QuadratureOptions,
) -> lambda2p::Result<TransitionResult> {
    match horizon {
        Some(t) => transition_probability(t, cfg, quad),
        None => transition_probability_asymptotic(cfg, quad),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointReport {
    pub exact: TransitionResult,
    pub p_cascaded: f64,
}

/// Exact and cascaded probability for one parameter set; `horizon = None`
/// means the long-time limit.
pub fn run_point(
    cfg: &ModelConfig,
    horizon: Option<f64>,
    quad: &QuadratureOptions,
) -> Result<PointReport, CliError> {
    Ok(PointReport {
        exact: evaluate(cfg, horizon, quad)?,
        p_cascaded: cascaded_probability(cfg),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Delta1,
    Delta2,
    GammaA,
    GammaB,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Delta1 => "delta1",
            SweepParam::Delta2 => "delta2",
            SweepParam::GammaA => "gamma_a",
            SweepParam::GammaB => "gamma_b",
        }
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &ModelConfig, value: f64) -> lambda2p::Result<ModelConfig> {
        let (atom, pulse) = (&base.atom, &base.pulse);
        let rebuild_atom = |ga: f64, gb: f64| -> lambda2p::Result<AtomParams> {
            AtomParams::new(ga, gb)?
                .with_omega_a(atom.omega_a())?
                .with_delta_ab(atom.delta_ab())
        };
        Ok(match self {
            SweepParam::Delta1 => (*base).with_pulse(PulseParams::new(value, pulse.delta2())?),
            SweepParam::Delta2 => (*base).with_pulse(PulseParams::new(pulse.delta1(), value)?),
            SweepParam::GammaA => (*base).with_atom(rebuild_atom(value, atom.gamma_b())?),
            SweepParam::GammaB => (*base).with_atom(rebuild_atom(atom.gamma_a(), value)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Scale {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub scale: Scale,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl SweepAxis {
    pub fn new(
        param: SweepParam,
        scale: Scale,
        min: f64,
        max: f64,
        count: usize,
    ) -> Result<Self, CliError> {
        if count < 2 {
            return Err(CliError::config(format!(
                "sweep count must be at least 2, got {count}"
            )));
        }
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(CliError::config(format!(
                "sweep needs min < max, got [{min}, {max}]"
            )));
        }
        if scale == Scale::Log && min <= 0.0 {
            return Err(CliError::config(format!(
                "log sweep needs min > 0, got {min}"
            )));
        }
        Ok(Self {
            param,
            scale,
            min,
            max,
            count,
        })
    }

    /// Increasing sample values; the endpoints are exact.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == self.count {
                    return self.max;
                }
                let f = i as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + f * (self.max - self.min),
                    Scale::Log => (self.min.ln() + f * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub p_exact: f64,
    pub p_cascaded: f64,
    pub err: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn exact(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_exact).collect()
    }

    pub fn cascaded(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_cascaded).collect()
    }

    pub fn table(&self) -> Table {
        let columns = vec![
            self.axis.param.name(),
            "p_exact",
            "p_cascaded",
            "err",
            "seconds",
        ];
        let mut t = Table::new(columns);
        for r in &self.rows {
            t.push(vec![
                r.value.into(),
                r.p_exact.into(),
                r.p_cascaded.into(),
                r.err.into(),
                r.seconds.into(),
            ]);
        }
        t
    }
}

/// Evaluates both models along `axis` on the worker pool. Rows come back in
/// axis order regardless of scheduling. Wall times are recorded only when
/// `timing` is set, so untimed output is reproducible byte for byte.
pub fn run_sweep(
    base: &ModelConfig,
    axis: &SweepAxis,
    horizon: Option<f64>,
    quad: &QuadratureOptions,
    timing: bool,
) -> Result<SweepResult, CliError> {
    let values = axis.values();
    let pool = worker_pool()?;
    let rows: Vec<Result<SweepRow, CliError>> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let start = Instant::now();
                let cfg = axis.param.apply(base, value)?;
                let point = run_point(&cfg, horizon, quad)?;
                Ok(SweepRow {
                    value,
                    p_exact: point.exact.p,
                    p_cascaded: point.p_cascaded,
                    err: point.exact.estimated_error,
                    seconds: timing.then(|| start.elapsed().as_secs_f64()),
                })
            })
            .collect()
    });
    Ok(SweepResult {
        axis: *axis,
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}

/// Parameter sets of the four figure panels and the saturated inset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Panel {
    #[value(name = "A")]
    A,
    #[value(name = "B")]
    B,
    #[value(name = "C")]
    C,
    #[value(name = "D")]
    D,
    Inset,
}

pub const FIG2_POINTS: usize = 40;
pub const FIG2_DELTA2_MIN: f64 = 1e-3;
pub const FIG2_DELTA2_MAX: f64 = 1e2;

impl Panel {
    pub fn label(self) -> &'static str {
        match self {
            Panel::A => "A",
            Panel::B => "B",
            Panel::C => "C",
            Panel::D => "D",
            Panel::Inset => "inset",
        }
    }

    /// `(Γ_b, Δ1)` with `Γ_a = 1`.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            Panel::A => (0.5, 0.001),
            Panel::B => (0.5, 100.0),
            Panel::C => (0.5, 0.5),
            Panel::D => (1.0, 0.1),
            Panel::Inset => (1.0, 0.001),
        }
    }

    /// Base configuration; `Δ2` is overwritten by the sweep.
    pub fn config(self) -> ModelConfig {
        let (gb, d1) = self.parameters();
        ModelConfig::resonant(1.0, gb, d1, 1.0).expect("panel parameters are valid")
    }

    pub fn axis(self, points: usize) -> Result<SweepAxis, CliError> {
        SweepAxis::new(
            SweepParam::Delta2,
            Scale::Log,
            FIG2_DELTA2_MIN,
            FIG2_DELTA2_MAX,
            points,
        )
    }
}

pub fn run_fig2(
    panel: Panel,
    points: usize,
    quad: &QuadratureOptions,
    timing: bool,
) -> Result<SweepResult, CliError> {
    run_sweep(&panel.config(), &panel.axis(points)?, None, quad, timing)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub modes: usize,
    pub half_width: f64,
    /// Defaults to `0.01/Γ`.
    pub dt: Option<f64>,
    /// Defaults to `40/Γ`.
    pub t_end: Option<f64>,
    pub tolerance: f64,
    /// Approximate number of comparison times.
    pub samples: usize,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            modes: 256,
            half_width: 30.0,
            dt: None,
            t_end: None,
            tolerance: 0.02,
            samples: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub grid: ModeGrid,
    pub dt: f64,
    pub t_end: f64,
    pub report: OracleReport,
    pub p_analytic: Vec<f64>,
    pub max_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub warnings: Vec<String>,
}

impl OracleCheck {
    pub fn table(&self) -> Table {
        let mut t = Table::new(vec![
            "t",
            "p_analytic",
            "p_oracle",
            "abs_diff",
            "norm",
            "excited_pop",
        ]);
        let r = &self.report;
        for i in 0..r.times.len() {
            t.push(vec![
                r.times[i].into(),
                self.p_analytic[i].into(),
                r.p_ab[i].into(),
                (r.p_ab[i] - self.p_analytic[i]).abs().into(),
                r.norm[i].into(),
                r.excited_pop[i].into(),
            ]);
        }
        t
    }
}

/// Runs the mode oracle and compares it with the analytic `p(t)` at the
/// sampled times.
pub fn run_oracle_check(
    cfg: &ModelConfig,
    settings: &OracleSettings,
    quad: &QuadratureOptions,
) -> Result<OracleCheck, CliError> {
    let gamma = cfg.atom.gamma();
    let dt = settings.dt.unwrap_or(0.01 / gamma);
    let t_end = settings.t_end.unwrap_or(40.0 / gamma);
    if settings.samples == 0 {
        return Err(CliError::config("oracle samples must be positive"));
    }
    let grid = ModeGrid::new(settings.half_width, settings.modes)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let stepping = Stepping {
        t_end,
        dt,
        sample_every: (steps / settings.samples).max(1),
    };
    let state = init_state(cfg, &grid)?;
    let (report, _) = integrate(state, cfg, &grid, &stepping)?;

    let pool = worker_pool()?;
    let analytic: Vec<lambda2p::Result<TransitionResult>> = pool.install(|| {
        report
            .times
            .par_iter()
            .map(|&t| transition_probability(t, cfg, quad))
            .collect()
    });
    let p_analytic = analytic
        .into_iter()
        .map(|r| r.map(|x| x.p))
        .collect::<lambda2p::Result<Vec<_>>>()?;
    let max_diff = report
        .p_ab
        .iter()
        .zip(&p_analytic)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut warnings = grid.warnings(cfg);
    if t_end > grid.recurrence_time() {
        warnings.push(format!(
            "t_end {t_end} exceeds the grid recurrence time {:.4}",
            grid.recurrence_time()
        ));
    }
    Ok(OracleCheck {
        grid,
        dt,
        t_end,
        passed: max_diff <= settings.tolerance,
        report,
        p_analytic,
        max_diff,
        tolerance: settings.tolerance,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FieldChoice {
    #[default]
    PsiA,
    PhiBa,
}

/// Snapshot of one amplitude on a regular grid (square grid for `φ^BA`).
pub fn run_field_snapshot(
    cfg: &ModelConfig,
    t: f64,
    kind: FieldChoice,
    grid: PositionGrid,
) -> Result<AmplitudeField, CliError> {
    Ok(match kind {
        FieldChoice::PsiA => AmplitudeField::psi_a(cfg, t, grid)?,
        FieldChoice::PhiBa => AmplitudeField::phi_ba(cfg, t, grid)?,
    })
}

pub fn field_table(field: &AmplitudeField) -> Table {
    let columns = match field.kind {
        FieldKind::PsiA => vec!["r", "t", "re", "im", "abs2"],
        FieldKind::PhiBa => vec!["r1", "r2", "t", "re", "im", "abs2"],
    };
    let mut table = Table::new(columns);
    for s in &field.samples {
        let mut row: Vec<Cell> = vec![s.r.into()];
        if let Some(r2) = s.r2 {
            row.push(r2.into());
        }
        row.extend([field.t, s.value.re, s.value.im, s.value.norm_sqr()].map(Cell::from));
        table.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_validation_and_values() {
        assert!(SweepAxis::new(SweepParam::Delta2, Scale::Log, 1.0, 2.0, 1).is_err());
        assert!(SweepAxis::new(SweepParam::Delta2, Scale::Log, 2.0, 1.0, 5).is_err());
        assert!(SweepAxis::new(SweepParam::Delta2, Scale::Log, 0.0, 1.0, 5).is_err());
        assert!(SweepAxis::new(SweepParam::Delta2, Scale::Linear, 0.0, 1.0, 5).is_ok());
        let axis = SweepAxis::new(SweepParam::Delta2, Scale::Log, 1e-3, 1e2, 6).unwrap();
        let v = axis.values();
        assert_eq!(v[0], 1e-3);
        assert_eq!(v[5], 1e2);
        for (x, e) in v.iter().zip([1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2]) {
            assert!((x / e - 1.0).abs() < 1e-13);
        }
        assert!(v.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_parameter_application() {
        let base = ModelConfig::resonant(1.0, 0.5, 0.2, 0.3)
            .unwrap()
            .with_atom(
                AtomParams::new(1.0, 0.5)
                    .unwrap()
                    .with_delta_ab(2.0)
                    .unwrap(),
            );
        let c = SweepParam::GammaB.apply(&base, 0.7).unwrap();
        assert_eq!(c.atom.gamma_b(), 0.7);
        assert_eq!(c.atom.delta_ab(), 2.0);
        assert_eq!(
            SweepParam::Delta1.apply(&base, 4.0).unwrap().pulse.delta1(),
            4.0
        );
        assert_eq!(
            SweepParam::Delta1.apply(&base, 4.0).unwrap().pulse.delta2(),
            0.3
        );
        assert!(SweepParam::GammaA.apply(&base, -1.0).is_err());
    }

    #[test]
    fn panels() {
        assert_eq!(Panel::D.config().atom.gamma_b(), 1.0);
        assert_eq!(Panel::B.config().pulse.delta1(), 100.0);
        let axis = Panel::A.axis(FIG2_POINTS).unwrap();
        assert_eq!(axis.values().len(), 40);
    }

    #[test]
    fn field_columns() {
        let cfg = Panel::C.config();
        let grid = PositionGrid::new(-2.0, 2.0, 5).unwrap();
        let f = run_field_snapshot(&cfg, 1.0, FieldChoice::PhiBa, grid).unwrap();
        let t = field_table(&f);
        assert_eq!(t.columns, vec!["r1", "r2", "t", "re", "im", "abs2"]);
        assert_eq!(t.rows.len(), 25);
        let f = run_field_snapshot(&cfg, 0.0, FieldChoice::PsiA, grid).unwrap();
        assert!(f.samples.iter().all(|s| s.value.norm() == 0.0));
    }
}
