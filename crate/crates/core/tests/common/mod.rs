//! Test-side numerics kept independent of the library's quadrature.

#![allow(dead_code)]

use lambda2p::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Five-point Gauss–Legendre nodes and weights on [-1, 1].
fn gl5() -> ([f64; 5], [f64; 5]) {
    let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
    let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
    ([-b, -a, 0.0, a, b], [wb, wa, 128.0 / 225.0, wa, wb])
}

/// Quadrature nodes and weights for a sequence of panel edges.
pub fn rule(edges: &[f64]) -> Vec<(f64, f64)> {
    let (x, w) = gl5();
    let mut out = Vec::with_capacity(5 * edges.len());
    for p in edges.windows(2) {
        let (mid, half) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
        for i in 0..5 {
            out.push((mid + half * x[i], half * w[i]));
        }
    }
    out
}

/// Panel edges on `[a, b]` that start at width `first` next to `anchor`
/// (either `a` or `b`) and grow by `growth` away from it.
pub fn graded(a: f64, b: f64, anchor_at_b: bool, first: f64, growth: f64) -> Vec<f64> {
    let len = b - a;
    let mut offsets = vec![0.0];
    let mut w = first;
    while offsets.last().unwrap() + w < len {
        offsets.push(offsets.last().unwrap() + w);
        w *= growth;
    }
    offsets.push(len);
    if anchor_at_b {
        offsets.iter().rev().map(|o| b - o).collect()
    } else {
        offsets.iter().map(|o| a + o).collect()
    }
}

/// Uniform panel edges.
pub fn uniform(a: f64, b: f64, panels: usize) -> Vec<f64> {
    (0..=panels)
        .map(|i| a + (b - a) * i as f64 / panels as f64)
        .collect()
}

pub fn integrate_complex(edges: &[f64], f: impl Fn(f64) -> Complex64) -> Complex64 {
    rule(edges).into_iter().map(|(x, w)| f(x) * w).sum()
}

pub fn integrate_real(edges: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    rule(edges).into_iter().map(|(x, w)| f(x) * w).sum()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Log-uniform sample in `[lo, hi]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}
