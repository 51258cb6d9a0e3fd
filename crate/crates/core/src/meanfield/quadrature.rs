//! Globally adaptive 21-point Gauss-Kronrod quadrature and the moment
//! integrals `alpha * int_0^inf x^(alpha-1) exp(-Q(x)) dx`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, RapError, Result};
use crate::order::Order;

use super::poly::ExponentPolynomial;

/// Kronrod abscissae; odd indices are the Gauss nodes, index 10 the center.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

/// Gauss weights paired with `XGK[2j + 1]`.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Tail cutoff: `exp(-46) < 1.1e-20`.
pub const TAIL_EXPONENT: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 0.0,
            rel: 1e-13,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One GK21 panel: `(kronrod, error estimate, roundoff floor)`.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut absolute = kronrod.abs();
    for j in 0..10 {
        let dx = half * XGK[j];
        let (f1, f2) = (f(center - dx), f(center + dx));
        kronrod += WGK[j] * (f1 + f2);
        absolute += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * absolute * half.abs();
    (value, error, floor)
}

/// Adaptive GK21 on a finite interval, bisecting the panel with the largest
/// error estimate until the total estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Integral> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(domain!("integration limits must be finite, got [{a}, {b}]"));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut floor = 0.0;
    let mut evaluations = 0;
    const INITIAL: usize = 4;
    for k in 0..INITIAL {
        let lo = a + (b - a) * k as f64 / INITIAL as f64;
        let hi = a + (b - a) * (k + 1) as f64 / INITIAL as f64;
        let (v, e, fl) = gk21(&f, lo, hi);
        evaluations += 21;
        value += v;
        error += e;
        floor += fl;
        heap.push(Panel {
            a: lo,
            b: hi,
            value: v,
            error: e,
        });
    }
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target || error <= floor {
            break;
        }
        if heap.len() >= tol.max_intervals {
            return Err(RapError::Convergence {
                iterations: heap.len(),
                residual: error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1, f1) = gk21(&f, worst.a, mid);
        let (v2, e2, f2) = gk21(&f, mid, worst.b);
        evaluations += 42;
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        floor += f1 + f2;
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
    // Resum to shed the drift of the running updates.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.error).sum();
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Smallest `x = 2^k` (k >= 0) beyond which `Q(x) - (alpha-1) ln x` stays above
/// [`TAIL_EXPONENT`], checked on a doubling grid up to `4x`.
fn tail_cutoff(alpha: f64, q: &ExponentPolynomial) -> Result<f64> {
    let log_weight = |x: f64| q.eval(x) - (alpha - 1.0) * x.ln();
    let mut x: f64 = 1.0;
    for _ in 0..200 {
        if q.eval(x) >= TAIL_EXPONENT
            && log_weight(x) >= TAIL_EXPONENT
            && log_weight(2.0 * x) >= log_weight(x)
            && log_weight(4.0 * x) >= log_weight(2.0 * x)
        {
            return Ok(x);
        }
        x *= 2.0;
    }
    Err(domain!("exponent {q} does not reach the tail cutoff"))
}

/// `alpha * int_0^inf x^(alpha-1) exp(-Q(x)) dx`.
///
/// Integrated in `t = sqrt(x)`, where the integrand
/// `2 alpha t^(2 alpha - 1) exp(-Q(t^2))` is smooth for half-integer `alpha`
/// and powers of `Q`.
pub fn moment_integral(alpha: Order, q: &ExponentPolynomial) -> Result<f64> {
    if alpha == Order::ZERO {
        return Err(domain!("moment order must be positive"));
    }
    match q.leading() {
        Some((p, c)) if p > Order::ZERO && c > 0.0 => {}
        _ => return Err(domain!("exponent {q} does not diverge at infinity")),
    }
    let a = alpha.value();
    let x_max = tail_cutoff(a, q)?;
    // t^(2 alpha - 1), exact for half-integer alpha >= 1/2.
    let weight_power = (2 * alpha.num() >= alpha.den())
        .then(|| Order::new(2 * alpha.num() - alpha.den(), alpha.den()));
    let integrand = |t: f64| {
        let weight = match weight_power {
            Some(p) => p.pow(t),
            None => t.powf(2.0 * a - 1.0),
        };
        2.0 * a * weight * (-q.eval(t * t)).exp()
    };
    Ok(integrate(integrand, 0.0, x_max.sqrt(), Tolerance::default())?.value)
}
