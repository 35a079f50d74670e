mod common;

use common::{graded, integrate_real, log_uniform, rng, rule};
use lambda2p::amplitudes::phi_ba;
use lambda2p::probability::{
    cascaded_probability, purified_population, transition_probability,
    transition_probability_asymptotic, Horizon,
};
use lambda2p::{AtomParams, ModelConfig, QuadratureOptions};
use proptest::prelude::*;
use std::f64::consts::PI;

fn config(ga: f64, gb: f64, d1: f64, d2: f64) -> ModelConfig {
    ModelConfig::resonant(ga, gb, d1, d2).unwrap()
}

fn quad() -> QuadratureOptions {
    QuadratureOptions::default()
}

/// `4 (2πϱc)⁻² ∬ |φ^BA|²` over the causal region, integrated directly.
fn outgoing_population(cfg: &ModelConfig, t: f64) -> f64 {
    let c = cfg.c();
    let slow = cfg
        .pulse
        .delta1()
        .min(cfg.pulse.delta2())
        .min(cfg.atom.gamma());
    let r2_nodes = rule(&graded(0.0, c * t, false, 0.02, 1.08));
    let mut total = 0.0;
    for (r2, w2) in r2_nodes {
        // φ^BA has a kink at r1 = r2; split there.
        let left = graded(-c * t - 40.0 * c / slow, r2, true, 0.02, 1.08);
        let right = graded(r2, c * t, false, 0.02, 1.08);
        let f = |r1: f64| phi_ba(r1, r2, t, cfg).unwrap().norm_sqr();
        total += w2 * (integrate_real(&left, f) + integrate_real(&right, f));
    }
    4.0 * total / (2.0 * PI * cfg.rho() * c).powi(2)
}

#[test]
fn probability_equals_outgoing_b_photon_population() {
    for (cfg, t) in [
        (config(1.0, 0.5, 0.5, 0.5), 6.0),
        (config(1.0, 1.0, 0.3, 2.0), 9.0),
        (config(1.0, 0.5, 1.5, 1.5).with_rho(3.0).unwrap(), 4.0),
    ] {
        let p = transition_probability(t, &cfg, &quad()).unwrap();
        let direct = outgoing_population(&cfg, t);
        assert!((p.p - direct).abs() < 1e-7, "t={t}: {} vs {direct}", p.p);
    }
}

#[test]
fn probability_grows_with_time() {
    let cfg = config(1.0, 0.5, 0.5, 3.0);
    let mut last = 0.0;
    for i in 1..=30 {
        let p = transition_probability(0.5 * i as f64, &cfg, &quad()).unwrap();
        assert!(
            p.p >= last - p.estimated_error,
            "step {i}: {} < {last}",
            p.p
        );
        last = p.p;
    }
    let inf = transition_probability_asymptotic(&cfg, &quad()).unwrap();
    assert!(inf.p >= last - 1e-6);
    assert!(matches!(inf.t, Horizon::Asymptotic(h) if h >= 10.0 / 0.5));
}

#[test]
fn invariant_under_density_and_frequency_offsets() {
    let base = config(1.0, 0.5, 0.5, 2.0);
    let p0 = transition_probability_asymptotic(&base, &quad()).unwrap().p;
    let variants = [
        base.with_rho(7.0).unwrap(),
        base.with_atom(
            AtomParams::new(1.0, 0.5)
                .unwrap()
                .with_omega_a(5.0)
                .unwrap(),
        ),
        base.with_atom(
            AtomParams::new(1.0, 0.5)
                .unwrap()
                .with_delta_ab(3.0)
                .unwrap(),
        ),
    ];
    for cfg in variants {
        let p = transition_probability_asymptotic(&cfg, &quad()).unwrap().p;
        assert!((p - p0).abs() <= 1e-10 * p0, "{p} vs {p0}");
    }
}

#[test]
fn far_off_broadband_pulse_rarely_transfers() {
    for d2 in [0.001, 0.1, 1.0, 10.0, 100.0] {
        let cfg = config(1.0, 0.5, 100.0, d2);
        let p = transition_probability_asymptotic(&cfg, &quad()).unwrap().p;
        let pc = cascaded_probability(&cfg);
        // A 100Γ-wide photon barely excites; the pair can do no better than
        // the narrower photon alone plus a small broadband share.
        let single = 4.0 * 0.5 / (2.25 * (1.0 + d2 / 1.5));
        assert!(p <= single + 0.02, "d2={d2}: {p} vs single {single}");
        assert!((p - pc).abs() < 0.02);
    }
}

#[test]
fn random_grid_stays_in_range() {
    let mut r = rng(3);
    let mut axis = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| log_uniform(&mut r, lo, hi)).collect()
    };
    let d1s = axis(10, 1e-3, 1e2);
    let d2s = axis(10, 1e-3, 1e2);
    let gas = axis(5, 0.1, 10.0);
    let gbs = axis(5, 0.1, 10.0);
    for &ga in &gas {
        for &gb in &gbs {
            for &d1 in &d1s {
                for &d2 in &d2s {
                    let cfg = config(ga, gb, d1, d2);
                    let res = transition_probability_asymptotic(&cfg, &quad()).unwrap();
                    assert!(
                        res.p >= -res.estimated_error && res.p <= 1.0 + res.estimated_error,
                        "{cfg:?}: {res:?}"
                    );
                    assert!((res.terms.total() - res.p).abs() <= 1e-12);
                }
            }
        }
    }
}

#[test]
fn purified_population_interpolates() {
    let cfg = config(1.0, 0.5, 0.5, 0.5);
    let p = transition_probability_asymptotic(&cfg, &quad()).unwrap().p;
    let half = purified_population(0.5, &cfg, &quad()).unwrap();
    assert!((half - (0.5 + 0.5 * p)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn swap_of_linewidths_preserves_probability(d1 in -3.0f64..2.0, d2 in -3.0f64..2.0) {
        let (d1, d2) = (10f64.powf(d1), 10f64.powf(d2));
        let a = transition_probability_asymptotic(&config(1.0, 0.5, d1, d2), &quad()).unwrap().p;
        let b = transition_probability_asymptotic(&config(1.0, 0.5, d2, d1), &quad()).unwrap().p;
        prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
    }

    #[test]
    fn finite_time_probability_bounded(gb in 0.05f64..3.0, d1 in 0.01f64..5.0, d2 in 0.01f64..5.0, t in 0.0f64..30.0) {
        let res = transition_probability(t, &config(1.0, gb, d1, d2), &quad()).unwrap();
        prop_assert!(res.p >= -res.estimated_error);
        prop_assert!(res.p <= 1.0 + res.estimated_error);
    }
}
