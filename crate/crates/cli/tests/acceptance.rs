//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use lambda2p::amplitudes::initial_wavepacket;
use lambda2p::probability::{cascaded_from_linewidths, transition_probability_asymptotic};
use lambda2p::quadrature::{geometric_breaks, integrate_panels};
use lambda2p::{AtomParams, ModelConfig, QuadratureOptions};
use lambda2p_cli::jobs::{
    run_fig2, run_oracle_check, OracleSettings, Panel, SweepResult, FIG2_POINTS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TIME_LIMIT: Duration = Duration::from_secs(300);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn quad() -> QuadratureOptions {
    QuadratureOptions::default()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig::resonant(1.0, 0.5, 0.5, 0.5).unwrap();
    let gamma = cfg.atom.gamma();
    let settings = OracleSettings {
        modes: 256,
        half_width: 30.0,
        dt: Some(0.01 / gamma),
        t_end: Some(40.0 / gamma),
        tolerance: 0.02,
        samples: 40,
    };
    let check = match run_oracle_check(&cfg, &settings, &quad()) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("oracle run failed: {e}")),
    };
    let elapsed = start.elapsed();
    let drift = check.report.norm_drift;
    outcome(
        check.max_diff <= 0.02 && drift <= 1e-7 && elapsed <= TIME_LIMIT,
        format!(
            "max |p_oracle - p_analytic| = {:.3e} (<= 2e-2), norm drift = {:.3e} (<= 1e-7), {} samples, {:.1} s",
            check.max_diff,
            drift,
            check.report.times.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn timed_panel(panel: Panel) -> Result<(SweepResult, Duration), String> {
    let start = Instant::now();
    let r = run_fig2(panel, FIG2_POINTS, &quad(), false).map_err(|e| e.to_string())?;
    Ok((r, start.elapsed()))
}

fn agreement(panel: Panel) -> Outcome {
    match timed_panel(panel) {
        Err(e) => outcome(false, e),
        Ok((r, elapsed)) => {
            let worst = r
                .rows
                .iter()
                .map(|row| (row.p_exact - row.p_cascaded).abs())
                .fold(0.0, f64::max);
            outcome(
                worst <= 0.02 && elapsed <= TIME_LIMIT,
                format!(
                    "max |p - p^C| = {worst:.4e} (<= 2e-2) over {} points, {:.1} s",
                    r.rows.len(),
                    elapsed.as_secs_f64()
                ),
            )
        }
    }
}

fn panel_c_dip() -> Outcome {
    let (r, _) = match timed_panel(Panel::C) {
        Ok(x) => x,
        Err(e) => return outcome(false, e),
    };
    let (p, pc) = (r.exact(), r.cascaded());
    let x: Vec<f64> = r.rows.iter().map(|row| row.value).collect();
    let in_range: Vec<usize> = (0..x.len())
        .filter(|&i| (0.1..=10.0).contains(&x[i]))
        .collect();
    let minima: Vec<usize> = in_range
        .iter()
        .copied()
        .filter(|&i| i > 0 && i + 1 < x.len() && p[i] < p[i - 1] && p[i] < p[i + 1])
        .collect();
    let monotone = in_range.windows(2).all(|w| pc[w[1]] <= pc[w[0]])
        || in_range.windows(2).all(|w| pc[w[1]] >= pc[w[0]]);
    match minima.first() {
        None => outcome(false, "no interior local minimum of p in [0.1, 10]".into()),
        Some(&i) => {
            let gap = pc[i] - p[i];
            outcome(
                monotone && gap >= 0.02,
                format!(
                    "local minimum p = {:.6} at Δ2 = {:.4}, p^C - p = {gap:.4} (>= 2e-2), p^C monotone on [0.1, 10]: {monotone}",
                    p[i], x[i]
                ),
            )
        }
    }
}

fn inset_saturation() -> Outcome {
    match timed_panel(Panel::Inset) {
        Err(e) => outcome(false, e),
        Ok((r, _)) => {
            let pmin = r.exact().into_iter().fold(f64::INFINITY, f64::min);
            let pcmin = r.cascaded().into_iter().fold(f64::INFINITY, f64::min);
            outcome(
                pmin >= 0.99 && pcmin >= 0.999,
                format!("min p = {pmin:.6} (>= 0.99), min p^C = {pcmin:.6} (>= 0.999)"),
            )
        }
    }
}

/// `2 (2πϱc)⁻² ∬ |φ^AA(r1, r2, 0)|²` by nested adaptive quadrature.
fn packet_norm(cfg: &ModelConfig) -> lambda2p::Result<f64> {
    let (d1, d2) = (cfg.pulse.delta1(), cfg.pulse.delta2());
    let c = cfg.c();
    let lo = -60.0 * c / d1.min(d2);
    let breaks = geometric_breaks(lo, 0.0, 0.05 * c / d1.max(d2), 4.0);
    let opts = QuadratureOptions::default().with_tolerances(1e-14, 1e-12);
    let mut failure = None;
    let outer = integrate_panels(
        |r1: f64| match integrate_panels(
            |r2: f64| initial_wavepacket(r1, r2, cfg).unwrap().norm_sqr(),
            &breaks,
            &opts,
        ) {
            Ok(e) => e.value,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        &breaks,
        &opts,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * outer.value / (2.0 * PI * cfg.rho() * c).powi(2))
}

fn normalization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (d1, d2) = (
            log_uniform(&mut rng, 1e-2, 1e1),
            log_uniform(&mut rng, 1e-2, 1e1),
        );
        let rho = log_uniform(&mut rng, 0.1, 10.0);
        let cfg = ModelConfig::resonant(1.0, 0.5, d1, d2)
            .unwrap()
            .with_rho(rho)
            .unwrap();
        match packet_norm(&cfg) {
            Ok(n) => worst = worst.max((n - 1.0).abs()),
            Err(e) => return outcome(false, format!("quadrature failed at Δ1={d1}, Δ2={d2}: {e}")),
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |norm - 1| = {worst:.3e} (<= 1e-9) over 10 random (Δ1, Δ2, ϱ)"),
    )
}

fn invariance() -> Outcome {
    let p_inf = |cfg: &ModelConfig| transition_probability_asymptotic(cfg, &quad());
    let base = ModelConfig::resonant(1.0, 0.5, 0.5, 2.0).unwrap();
    let atom = AtomParams::new(1.0, 0.5).unwrap();
    let variants = [
        ("ϱ×7", base.with_rho(7.0).unwrap()),
        ("ω_a+5", base.with_atom(atom.with_omega_a(5.0).unwrap())),
        ("δ_ab+3", base.with_atom(atom.with_delta_ab(3.0).unwrap())),
    ];
    let p0 = match p_inf(&base) {
        Ok(r) => r.p,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut shift: f64 = 0.0;
    for (_, cfg) in &variants {
        match p_inf(cfg) {
            Ok(r) => shift = shift.max(((r.p - p0) / p0).abs()),
            Err(e) => return outcome(false, e.to_string()),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut swap: f64 = 0.0;
    for _ in 0..20 {
        let (d1, d2) = (
            log_uniform(&mut rng, 1e-3, 1e2),
            log_uniform(&mut rng, 1e-3, 1e2),
        );
        let a = p_inf(&ModelConfig::resonant(1.0, 0.5, d1, d2).unwrap());
        let b = p_inf(&ModelConfig::resonant(1.0, 0.5, d2, d1).unwrap());
        match (a, b) {
            (Ok(a), Ok(b)) => swap = swap.max((a.p - b.p).abs()),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
        }
    }

    let mut out_of_range = 0;
    let mut failures = 0;
    let mut lowest = f64::INFINITY;
    let mut highest = f64::NEG_INFINITY;
    for _ in 0..500 {
        let cfg = ModelConfig::resonant(
            log_uniform(&mut rng, 0.1, 10.0),
            log_uniform(&mut rng, 0.1, 10.0),
            log_uniform(&mut rng, 1e-3, 1e2),
            log_uniform(&mut rng, 1e-3, 1e2),
        )
        .unwrap();
        match p_inf(&cfg) {
            Ok(r) => {
                lowest = lowest.min(r.p);
                highest = highest.max(r.p);
                if r.p < 0.0 || r.p > 1.0 + r.estimated_error {
                    out_of_range += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        shift <= 1e-10 && swap <= 1e-6 && out_of_range == 0 && failures == 0,
        format!(
            "max relative shift (ϱ×7, ω_a+5, δ_ab+3) = {shift:.2e} (<= 1e-10); max |p(Δ1,Δ2) - p(Δ2,Δ1)| = {swap:.2e} (<= 1e-6) over 20 pairs; \
             500 random points: p in [{lowest:.4}, {highest:.4}], {out_of_range} out of range, {failures} failed"
        ),
    )
}

fn removable_singularity() -> Outcome {
    let atom = AtomParams::new(1.0, 0.5).unwrap();
    let gamma = atom.gamma();
    let at = |d2: f64| {
        transition_probability_asymptotic(
            &ModelConfig::resonant(1.0, 0.5, 0.5, d2).unwrap(),
            &quad(),
        )
        .map(|r| r.p)
    };
    match (
        at(gamma * (1.0 - 1e-6)),
        at(gamma),
        at(gamma * (1.0 + 1e-6)),
    ) {
        (Ok(lo), Ok(mid), Ok(hi)) => {
            let rel = ((hi - lo) / mid).abs();
            outcome(rel <= 1e-4, format!("p(Γ(1-1e-6)) = {lo:.10}, p(Γ) = {mid:.10}, p(Γ(1+1e-6)) = {hi:.10}, relative spread {rel:.2e} (<= 1e-4)"))
        }
        _ => outcome(false, "evaluation failed".into()),
    }
}

fn cascaded_values() -> Outcome {
    let equal = AtomParams::new(1.0, 1.0).unwrap();
    let unequal = AtomParams::new(1.0, 0.5).unwrap();
    let a = cascaded_from_linewidths(&equal, 0.0, 0.0).unwrap();
    let b = cascaded_from_linewidths(&unequal, 0.0, 0.0).unwrap();
    let err = (b - 80.0 / 81.0).abs();
    outcome(
        a == 1.0 && err <= 1e-12,
        format!(
            "p^C(Γa=Γb, Δ→0) = {a} (exactly 1), |p^C(1, 0.5, Δ→0) - 80/81| = {err:.1e} (<= 1e-12)"
        ),
    )
}

fn determinism() -> Outcome {
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_lambda2p"))
            .args(["fig2", "--panel", "C"])
            .output()
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) if a.status.success() && b.status.success() => outcome(
            a.stdout == b.stdout,
            format!(
                "two runs of `fig2 --panel C`: {} and {} bytes, identical: {}",
                a.stdout.len(),
                b.stdout.len(),
                a.stdout == b.stdout
            ),
        ),
        _ => outcome(false, "binary did not run successfully".into()),
    }
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (
            "1 oracle equivalence (panel C, M=256, W=30, dt=0.01/Γ)",
            oracle_equivalence,
        ),
        ("2 panel A agreement (Γb=0.5, Δ1=0.001)", || {
            agreement(Panel::A)
        }),
        ("3 panel B agreement (Γb=0.5, Δ1=100)", || {
            agreement(Panel::B)
        }),
        ("4 panel C dip (Γb=0.5, Δ1=0.5)", panel_c_dip),
        ("5 inset saturation (Γb=1, Δ1=0.001)", inset_saturation),
        ("6 pulse normalization", normalization),
        ("7 invariance suite", invariance),
        ("8 removable singularity at Δ2 = Γ", removable_singularity),
        ("9 cascaded closed values", cascaded_values),
        ("10 byte-identical fig2 output", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        if !o.passed {
            failed += 1;
        }
        println!(
            "[{tag}] criterion {name}: {} ({:.1} s)",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
