//! Adaptive Gauss–Kronrod (10/21-point) quadrature over finite intervals.
//!
//! The integrand may return any [`QuadValue`]: a real, a complex number or
//! a small fixed-size vector of reals, so several related integrals can share
//! one set of subdivisions. Subdivision is greedy: the interval with the
//! largest error estimate is bisected until the summed error meets
//! `max(abs_tol, rel_tol · |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Gauss weights for the odd Kronrod nodes `XGK[1], XGK[3], …, XGK[9]`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Values that can be integrated.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    /// Size used for error control.
    fn magnitude(&self) -> f64;
    /// Component-wise absolute value, for the roundoff heuristic.
    fn abs_sum(&self) -> f64 {
        self.magnitude()
    }
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Fixed-size real vector; error control uses the max-norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const N: usize>(pub [f64; N]);

impl<const N: usize> Add for Vector<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
        self
    }
}

impl<const N: usize> Sub for Vector<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        self
    }
}

impl<const N: usize> Mul<f64> for Vector<N> {
    type Output = Self;
    fn mul(mut self, rhs: f64) -> Self {
        for a in self.0.iter_mut() {
            *a *= rhs;
        }
        self
    }
}

impl<const N: usize> QuadValue for Vector<N> {
    fn zero() -> Self {
        Vector([0.0; N])
    }
    fn magnitude(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tolerances and limits for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Finite stand-in for `−∞` on semi-infinite position integrals, in
    /// units of `c/Γ`. `None` picks a cutoff from the slowest decay rate.
    pub r1_cutoff: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_subdivisions: 2000,
            r1_cutoff: None,
        }
    }
}

impl QuadratureOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::domain("abs_tol", "must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::domain("rel_tol", "must be positive"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::domain("max_subdivisions", "must be at least 1"));
        }
        if let Some(cut) = self.r1_cutoff {
            if !(cut < 0.0 && cut.is_finite()) {
                return Err(Error::domain(
                    "r1_cutoff",
                    format!("must be negative, got {cut}"),
                ));
            }
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[10];
    let mut gauss = V::zero();
    let mut abs_k = fc.abs_sum() * WGK[10];
    let mut fv = [V::zero(); 21];
    fv[0] = fc;
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kron = kron + pair * WGK[j];
        abs_k += (f1.abs_sum() + f2.abs_sum()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
        fv[2 * j + 1] = f1;
        fv[2 * j + 2] = f2;
    }
    let mean = kron * 0.5;
    let mut asc = (fc - mean).abs_sum() * WGK[10];
    for j in 0..10 {
        asc += ((fv[2 * j + 1] - mean).abs_sum() + (fv[2 * j + 2] - mean).abs_sum()) * WGK[j];
    }
    let result = kron * half;
    let res_abs = abs_k * half.abs();
    let res_asc = asc * half.abs();
    let mut err = ((kron - gauss) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Integrates `f` over `[a, b]`. Reversed or empty intervals are allowed.
pub fn integrate<V, F>(f: F, a: f64, b: f64, opts: &QuadratureOptions) -> Result<Estimate<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    if b < a {
        let e = integrate(f, b, a, opts)?;
        return Ok(Estimate {
            value: e.value * -1.0,
            ..e
        });
    }
    integrate_panels(f, &[a, b], opts)
}

/// Breakpoints on `[a, b]` that grow geometrically (by `ratio`) away from
/// both ends, starting at `min_len`. Integrands with structure on several
/// length scales near the endpoints need these as starting panels, since a
/// single 21-point rule over a long interval can miss a narrow feature
/// entirely.
pub fn geometric_breaks(a: f64, b: f64, min_len: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![a, b];
    let half = 0.5 * (b - a);
    if half > 0.0 && min_len > 0.0 && ratio > 1.0 {
        let mut len = min_len;
        while len < half {
            pts.push(a + len);
            pts.push(b - len);
            len *= ratio;
        }
        pts.push(a + half);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integrates over `[breaks[0], breaks[last]]` starting from the panels
/// between consecutive (sorted) breakpoints, with error control on the total.
pub fn integrate_panels<V, F>(
    mut f: F,
    breaks: &[f64],
    opts: &QuadratureOptions,
) -> Result<Estimate<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let mut heap = BinaryHeap::new();
    let mut total = V::zero();
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            continue;
        }
        let (value, error) = kronrod(&mut f, a, b);
        evaluations += 21;
        total = total + value;
        total_err += error;
        heap.push(Panel { a, b, value, error });
    }
    if heap.is_empty() {
        return Ok(Estimate {
            value: V::zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    // Panels too narrow to split further; kept out of the heap.
    let mut frozen: Vec<Panel<V>> = Vec::new();
    let mut splits = 0;

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * mid.abs().max(1.0) {
            frozen.push(worst);
            continue;
        }
        if splits >= opts.max_subdivisions {
            heap.push(worst);
            let (value, error) = sum_panels(&heap, &frozen);
            return Err(Error::Quadrature {
                estimate: value.magnitude(),
                achieved: error,
                requested: opts.abs_tol.max(opts.rel_tol * value.magnitude()),
            });
        }
        splits += 1;
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        evaluations += 42;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    let (value, error) = sum_panels(&heap, &frozen);
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Resums panels in position order so the result does not depend on the
/// history of running updates.
fn sum_panels<V: QuadValue>(heap: &BinaryHeap<Panel<V>>, frozen: &[Panel<V>]) -> (V, f64) {
    let mut panels: Vec<&Panel<V>> = heap.iter().chain(frozen.iter()).collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels
        .into_iter()
        .fold((V::zero(), 0.0), |(v, e), p| (v + p.value, e + p.error))
}
