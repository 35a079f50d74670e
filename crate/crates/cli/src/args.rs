//! Command-line definition and its resolution into a [`RunConfig`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use lambda2p::amplitudes::PositionGrid;
use lambda2p::probability::{ASYMPTOTE_TOLERANCE, MAX_DOUBLINGS};
use lambda2p::{AtomParams, ModelConfig, PulseParams, QuadratureOptions};

use crate::config::ConfigFile;
use crate::error::CliError;
use crate::jobs::{
    field_table, run_field_snapshot, run_fig2, run_oracle_check, run_point, run_sweep, FieldChoice,
    OracleSettings, Panel, Scale, SweepAxis, SweepParam, FIG2_POINTS,
};
use crate::table::{OutputFormat, Table};

#[derive(Debug, Parser)]
#[command(
    name = "lambda2p",
    version,
    about = "Two-photon Raman transfer in a lambda atom coupled to a chiral waveguide"
)]
pub struct Cli {
    /// key=value file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact and cascaded probability for one parameter set.
    Point(PointArgs),
    /// Both models along one parameter axis.
    Sweep(SweepArgs),
    /// Curves of one figure panel (log sweep of Δ2).
    Fig2(Fig2Args),
    /// Cross-check the analytic p(t) against the discretized-mode oracle.
    OracleCheck(OracleArgs),
    /// Amplitude snapshot on a position grid.
    Field(FieldArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma_b: Option<f64>,
    /// Linewidth of the first photon.
    #[arg(long, allow_negative_numbers = true)]
    pub delta1: Option<f64>,
    /// Linewidth of the second photon.
    #[arg(long, allow_negative_numbers = true)]
    pub delta2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub omega_a: Option<f64>,
    /// Ground-state splitting ω_a − ω_b.
    #[arg(long, allow_negative_numbers = true)]
    pub delta_ab: Option<f64>,
    /// Mode density (drops out of every probability).
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProbabilityArgs {
    /// Finite horizon; the long-time limit when absent.
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Quadrature tolerance on p (absolute; also caps the relative tolerance).
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prob: ProbabilityArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub prob: ProbabilityArgs,
    #[arg(long, value_enum)]
    pub param: Option<SweepParam>,
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, value_enum)]
    pub scale: Option<Scale>,
    /// Fill the `seconds` column with per-row wall time.
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct Fig2Args {
    #[arg(long, value_enum, ignore_case = true)]
    pub panel: Option<Panel>,
    /// Number of Δ2 values.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Modes per polarization.
    #[arg(long)]
    pub grid_modes: Option<usize>,
    /// Half width of the frequency grid.
    #[arg(long, allow_negative_numbers = true)]
    pub grid_width: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    /// End time (default 40/Γ).
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    /// Largest accepted |p_oracle − p_analytic|.
    #[arg(long, allow_negative_numbers = true)]
    pub oracle_tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FieldArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<FieldChoice>,
    #[arg(long, allow_negative_numbers = true)]
    pub r_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Fully resolved job.
#[derive(Debug, Clone)]
pub enum Job {
    Point {
        model: ModelConfig,
        horizon: Option<f64>,
        quad: QuadratureOptions,
    },
    Sweep {
        model: ModelConfig,
        axis: SweepAxis,
        horizon: Option<f64>,
        quad: QuadratureOptions,
        timing: bool,
    },
    Fig2 {
        panel: Panel,
        points: usize,
        quad: QuadratureOptions,
        timing: bool,
    },
    Oracle {
        model: ModelConfig,
        settings: OracleSettings,
        quad: QuadratureOptions,
    },
    Field {
        model: ModelConfig,
        t: f64,
        kind: FieldChoice,
        grid: PositionGrid,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub job: Job,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Default model: the dip regime of panel C at Δ2 = Δ1.
const DEFAULT_MODEL: (f64, f64, f64, f64) = (1.0, 0.5, 0.5, 0.5);

fn resolve_model(args: &ModelArgs, file: &ConfigFile) -> Result<ModelConfig, CliError> {
    let (ga0, gb0, d10, d20) = DEFAULT_MODEL;
    let ga = file.pick("gamma-a", args.gamma_a)?.unwrap_or(ga0);
    let gb = file.pick("gamma-b", args.gamma_b)?.unwrap_or(gb0);
    let d1 = file.pick("delta1", args.delta1)?.unwrap_or(d10);
    let d2 = file.pick("delta2", args.delta2)?.unwrap_or(d20);
    let mut atom = AtomParams::new(ga, gb)?;
    if let Some(w) = file.pick("omega-a", args.omega_a)? {
        atom = atom.with_omega_a(w)?;
    }
    if let Some(d) = file.pick("delta-ab", args.delta_ab)? {
        atom = atom.with_delta_ab(d)?;
    }
    let mut cfg = ModelConfig::new(atom, PulseParams::new(d1, d2)?);
    if let Some(rho) = file.pick("rho", args.rho)? {
        cfg = cfg.with_rho(rho)?;
    }
    if let Some(c) = file.pick("c", args.c)? {
        cfg = cfg.with_c(c)?;
    }
    Ok(cfg)
}

fn resolve_quad(file: &ConfigFile, tol: Option<f64>) -> Result<QuadratureOptions, CliError> {
    let mut quad = QuadratureOptions::default();
    if let Some(tol) = file.pick("tol", tol)? {
        quad.abs_tol = tol;
        quad.rel_tol = quad.rel_tol.min(tol);
    }
    quad.validate()?;
    Ok(quad)
}

fn resolve_horizon(file: &ConfigFile, t: Option<f64>) -> Result<Option<f64>, CliError> {
    let t = file.pick("t", t)?;
    if let Some(t) = t {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::config(format!(
                "t must be finite and >= 0, got {t}"
            )));
        }
    }
    Ok(t)
}

fn resolve_timing(file: &ConfigFile, flag: bool) -> Result<bool, CliError> {
    Ok(flag || file.pick::<bool>("timing", None)?.unwrap_or(false))
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let output = match &cli.command {
            Command::Point(a) => &a.output,
            Command::Sweep(a) => &a.output,
            Command::Fig2(a) => &a.output,
            Command::OracleCheck(a) => &a.output,
            Command::Field(a) => &a.output,
        };
        let out = file.pick::<PathBuf>("out", output.out.clone())?;
        let format = file.pick_enum("format", output.format)?.unwrap_or_default();

        let job = match &cli.command {
            Command::Point(a) => Job::Point {
                model: resolve_model(&a.model, &file)?,
                horizon: resolve_horizon(&file, a.prob.t)?,
                quad: resolve_quad(&file, a.prob.tol)?,
            },
            Command::Sweep(a) => {
                let param = file
                    .pick_enum("param", a.param)?
                    .unwrap_or(SweepParam::Delta2);
                let scale = file.pick_enum("scale", a.scale)?.unwrap_or_default();
                let min = file
                    .pick("min", a.min)?
                    .ok_or_else(|| CliError::config("sweep needs --min"))?;
                let max = file
                    .pick("max", a.max)?
                    .ok_or_else(|| CliError::config("sweep needs --max"))?;
                let count = file.pick("count", a.count)?.unwrap_or(FIG2_POINTS);
                Job::Sweep {
                    model: resolve_model(&a.model, &file)?,
                    axis: SweepAxis::new(param, scale, min, max, count)?,
                    horizon: resolve_horizon(&file, a.prob.t)?,
                    quad: resolve_quad(&file, a.prob.tol)?,
                    timing: resolve_timing(&file, a.timing)?,
                }
            }
            Command::Fig2(a) => Job::Fig2 {
                panel: file
                    .pick_enum("panel", a.panel)?
                    .ok_or_else(|| CliError::config("fig2 needs --panel"))?,
                points: file.pick("points", a.points)?.unwrap_or(FIG2_POINTS),
                quad: resolve_quad(&file, a.tol)?,
                timing: resolve_timing(&file, a.timing)?,
            },
            Command::OracleCheck(a) => {
                let d = OracleSettings::default();
                Job::Oracle {
                    model: resolve_model(&a.model, &file)?,
                    settings: OracleSettings {
                        modes: file.pick("grid-modes", a.grid_modes)?.unwrap_or(d.modes),
                        half_width: file
                            .pick("grid-width", a.grid_width)?
                            .unwrap_or(d.half_width),
                        dt: file.pick("dt", a.dt)?,
                        t_end: resolve_horizon(&file, a.t)?,
                        tolerance: file
                            .pick("oracle-tol", a.oracle_tol)?
                            .unwrap_or(d.tolerance),
                        samples: d.samples,
                    },
                    quad: resolve_quad(&file, a.tol)?,
                }
            }
            Command::Field(a) => {
                let t = resolve_horizon(&file, a.t)?
                    .ok_or_else(|| CliError::config("field needs --t"))?;
                let r_min = file.pick("r-min", a.r_min)?.unwrap_or(-10.0);
                let r_max = file.pick("r-max", a.r_max)?.unwrap_or(t.max(1.0) + 2.0);
                let points = file.pick("points", a.points)?.unwrap_or(201);
                Job::Field {
                    model: resolve_model(&a.model, &file)?,
                    t,
                    kind: file.pick_enum("kind", a.kind)?.unwrap_or_default(),
                    grid: PositionGrid::new(r_min, r_max, points)?,
                }
            }
        };
        Ok(Self { job, out, format })
    }

    /// Header entries sufficient to repeat the run; keys are config-file keys.
    fn metadata(&self, table: &mut Table) {
        table.meta("lambda2p-version", env!("CARGO_PKG_VERSION"));
        let model_meta = |t: &mut Table, m: &ModelConfig| {
            t.meta("gamma-a", m.atom.gamma_a());
            t.meta("gamma-b", m.atom.gamma_b());
            t.meta("delta1", m.pulse.delta1());
            t.meta("delta2", m.pulse.delta2());
            t.meta("omega-a", m.atom.omega_a());
            t.meta("delta-ab", m.atom.delta_ab());
            t.meta("rho", m.rho());
            t.meta("c", m.c());
        };
        let quad_meta = |t: &mut Table, q: &QuadratureOptions| {
            t.meta("tol", q.abs_tol);
            t.meta("rel-tol", q.rel_tol);
            t.meta("max-subdivisions", q.max_subdivisions);
        };
        let horizon_meta = |t: &mut Table, h: Option<f64>| match h {
            Some(h) => t.meta("t", h),
            None => {
                t.meta("t", "inf");
                t.meta("asymptote-tol", ASYMPTOTE_TOLERANCE);
                t.meta("max-doublings", MAX_DOUBLINGS);
            }
        };
        match &self.job {
            Job::Point {
                model,
                horizon,
                quad,
            } => {
                table.meta("mode", "point");
                model_meta(table, model);
                horizon_meta(table, *horizon);
                quad_meta(table, quad);
            }
            Job::Sweep {
                model,
                axis,
                horizon,
                quad,
                timing,
            } => {
                table.meta("mode", "sweep");
                model_meta(table, model);
                sweep_meta(table, axis);
                horizon_meta(table, *horizon);
                quad_meta(table, quad);
                table.meta("timing", timing);
            }
            Job::Fig2 {
                panel,
                points,
                quad,
                timing,
            } => {
                table.meta("mode", "fig2");
                table.meta("panel", panel.label());
                table.meta("points", points);
                model_meta(table, &panel.config());
                sweep_meta(table, &panel.axis(*points).expect("validated"));
                horizon_meta(table, None);
                quad_meta(table, quad);
                table.meta("timing", timing);
            }
            Job::Oracle { model, quad, .. } => {
                table.meta("mode", "oracle");
                model_meta(table, model);
                quad_meta(table, quad);
            }
            Job::Field {
                model,
                t,
                kind,
                grid,
            } => {
                table.meta("mode", "field");
                model_meta(table, model);
                table.meta("t", t);
                table.meta(
                    "kind",
                    if *kind == FieldChoice::PsiA {
                        "psi-a"
                    } else {
                        "phi-ba"
                    },
                );
                table.meta("r-min", grid.min);
                table.meta("r-max", grid.max);
                table.meta("points", grid.count);
            }
        }
    }

    /// Runs the job and builds its output table. A failed oracle comparison
    /// still yields the table, together with the failure.
    pub fn run(&self) -> Result<(Table, Option<CliError>), CliError> {
        let mut table = Table::default();
        self.metadata(&mut table);
        let mut failure = None;
        let body = match &self.job {
            Job::Point {
                model,
                horizon,
                quad,
            } => {
                let p = run_point(model, *horizon, quad)?;
                let mut t = Table::new(vec![
                    "p_exact",
                    "p_cascaded",
                    "err",
                    "direct",
                    "stimulated",
                    "cross",
                ]);
                let terms = p.exact.terms;
                t.push(
                    [
                        p.exact.p,
                        p.p_cascaded,
                        p.exact.estimated_error,
                        terms.direct,
                        terms.stimulated,
                        terms.cross,
                    ]
                    .map(Into::into)
                    .to_vec(),
                );
                t
            }
            Job::Sweep {
                model,
                axis,
                horizon,
                quad,
                timing,
            } => run_sweep(model, axis, *horizon, quad, *timing)?.table(),
            Job::Fig2 {
                panel,
                points,
                quad,
                timing,
            } => run_fig2(*panel, *points, quad, *timing)?.table(),
            Job::Oracle {
                model,
                settings,
                quad,
            } => {
                let check = run_oracle_check(model, settings, quad)?;
                table.meta("grid-modes", check.grid.n_modes);
                table.meta("grid-width", check.grid.half_width);
                table.meta("dt", check.dt);
                table.meta("t", check.t_end);
                table.meta("oracle-tol", check.tolerance);
                table.meta("max-diff", check.max_diff);
                table.meta("norm-drift", check.report.norm_drift);
                table.meta("passed", check.passed);
                for w in &check.warnings {
                    table.meta("warning", w);
                }
                if !check.passed {
                    failure = Some(CliError::CheckFailed {
                        max_diff: check.max_diff,
                        tolerance: check.tolerance,
                        norm_drift: check.report.norm_drift,
                    });
                }
                check.table()
            }
            Job::Field {
                model,
                t,
                kind,
                grid,
            } => field_table(&run_field_snapshot(model, *t, *kind, *grid)?),
        };
        table.columns = body.columns;
        table.rows = body.rows;
        Ok((table, failure))
    }
}

fn sweep_meta(table: &mut Table, axis: &SweepAxis) {
    table.meta("param", axis.param.name());
    table.meta(
        "scale",
        if axis.scale == Scale::Log {
            "log"
        } else {
            "linear"
        },
    );
    table.meta("min", axis.min);
    table.meta("max", axis.max);
    table.meta("count", axis.count);
}

/// Parses, runs and writes; output goes to `--out` or to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let run = RunConfig::from_cli(cli)?;
    let (table, failure) = run.run()?;
    match &run.out {
        Some(path) => {
            let io_err = |source| CliError::Io {
                path: path.display().to_string(),
                source,
            };
            let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
            table.write(run.format, &mut w).map_err(io_err)?;
            w.flush().map_err(io_err)?;
        }
        None => table
            .write(run.format, stdout)
            .map_err(|source| CliError::Io {
                path: "stdout".into(),
                source,
            })?,
    }
    failure.map_or(Ok(()), Err)
}
