//! Special functions behind the identical-twins surface correction.

use std::f64::consts::PI;

use libm::{lgamma as ln_gamma, tgamma as gamma};

use crate::error::{domain, Result};

const CF_MAX_ITER: usize = 1000;
const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;

/// Volume of the unit ball in `d` dimensions, `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: u32) -> Result<f64> {
    if d < 1 {
        return Err(domain!("unit ball volume needs d >= 1, got {d}"));
    }
    let half = 0.5 * d as f64;
    Ok(PI.powf(half) / gamma(half + 1.0))
}

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Evaluated with the modified Lentz continued fraction, switching to
/// `1 - I_{1-x}(b, a)` when `x > (a + 1) / (a + b + 2)` so that the fraction
/// always converges quickly.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite()) {
        return Err(domain!("incomplete beta needs a, b > 0 (got a={a}, b={b})"));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(domain!("incomplete beta needs x in [0, 1], got {x}"));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x > (a + 1.0) / (a + b + 2.0) {
        Ok(1.0 - beta_fraction(1.0 - x, b, a))
    } else {
        Ok(beta_fraction(x, a, b))
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> f64 {
    let ln_prefix = a * x.ln() + b * (1.0 - x).ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    let prefix = ln_prefix.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_EPS {
            break;
        }
    }
    prefix * h
}

/// Area of the unit hyperspherical cap of half-angle `phi` on the unit
/// `(d-1)`-sphere: `(d V_d / 2) I_{sin^2 phi}((d-1)/2, 1/2)`.
pub fn cap_area(phi: f64, d: u32) -> Result<f64> {
    if d < 2 {
        return Err(domain!("cap area needs d >= 2, got {d}"));
    }
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&phi) {
        return Err(domain!("cap half-angle must lie in [0, pi/2], got {phi}"));
    }
    let half_surface = 0.5 * d as f64 * unit_ball_volume(d)?;
    let s = phi.sin();
    let x = if phi == std::f64::consts::FRAC_PI_2 {
        1.0
    } else {
        (s * s).min(1.0)
    };
    Ok(half_surface * regularized_incomplete_beta(x, 0.5 * (d as f64 - 1.0), 0.5)?)
}
