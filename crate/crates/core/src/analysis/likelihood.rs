use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::order::Order;

use super::fit::FitResult;

/// Distribution of `gamma = 1 + alpha / (1 - lambda_alpha)` when
/// `lambda_alpha ~ N(lambda, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaLikelihood {
    pub alpha: Order,
    pub lambda: f64,
    pub sigma: f64,
    /// `gamma` at the fitted `lambda` (infinite if `lambda >= 1`).
    pub point: f64,
    /// Maximum of the transformed density.
    pub mode: f64,
    /// Image of `lambda -/+ sigma`; the upper end is infinite if
    /// `lambda + sigma >= 1`.
    pub interval: (f64, f64),
    /// Gaussian mass at `lambda_alpha >= 1`, where `gamma` is undefined.
    pub truncated_mass: f64,
    /// Set when the truncated mass is not negligible (above 1e-15).
    pub truncated: bool,
}

impl GammaLikelihood {
    pub fn contains(&self, gamma: f64) -> bool {
        self.interval.0 <= gamma && gamma <= self.interval.1
    }

    /// Density of `gamma` at `g`.
    pub fn density(&self, g: f64) -> f64 {
        gamma_density(self.alpha.value(), self.lambda, self.sigma, g)
    }
}

fn gamma_of(alpha: f64, lambda: f64) -> f64 {
    if lambda >= 1.0 {
        f64::INFINITY
    } else {
        1.0 + alpha / (1.0 - lambda)
    }
}

fn gamma_density(alpha: f64, mu: f64, sigma: f64, g: f64) -> f64 {
    if !(g > 1.0) {
        return 0.0;
    }
    let lambda = 1.0 - alpha / (g - 1.0);
    let z = (lambda - mu) / sigma;
    let jacobian = alpha / ((g - 1.0) * (g - 1.0));
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()) * jacobian
}

fn log_density(alpha: f64, mu: f64, sigma: f64, g: f64) -> f64 {
    let lambda = 1.0 - alpha / (g - 1.0);
    let z = (lambda - mu) / sigma;
    -0.5 * z * z - 2.0 * (g - 1.0).ln()
}

/// Exact change of variables of the Gaussian `lambda_alpha` fit into `gamma`.
pub fn gamma_likelihood(fit: &FitResult, alpha: Order) -> Result<GammaLikelihood> {
    gamma_likelihood_from(fit.lambda, fit.sigma_lambda, alpha)
}

pub fn gamma_likelihood_from(lambda: f64, sigma: f64, alpha: Order) -> Result<GammaLikelihood> {
    if alpha == Order::ZERO {
        return Err(domain!("gamma is undefined for alpha = 0"));
    }
    if !(sigma >= 0.0 && sigma.is_finite() && lambda.is_finite()) {
        return Err(domain!("need finite lambda and sigma >= 0, got {lambda} +/- {sigma}"));
    }
    if !(lambda < 1.0) && !(lambda - 8.0 * sigma < 1.0) {
        return Err(domain!("lambda_{alpha} = {lambda} +/- {sigma} leaves no mass below 1"));
    }
    let a = alpha.value();
    let point = gamma_of(a, lambda);
    if sigma == 0.0 {
        return Ok(GammaLikelihood {
            alpha,
            lambda,
            sigma,
            point,
            mode: point,
            interval: (point, point),
            truncated_mass: 0.0,
            truncated: false,
        });
    }
    let truncated_mass = 0.5 * libm::erfc((1.0 - lambda) / (sigma * std::f64::consts::SQRT_2));

    // Golden-section search for the mode of the log-density.
    let lo_lambda = lambda - 8.0 * sigma;
    let hi_lambda = (lambda + 8.0 * sigma).min(1.0 - 1e-12 * a.max(1.0));
    let (mut lo, mut hi) = (gamma_of(a, lo_lambda).max(1.0 + 1e-300), gamma_of(a, hi_lambda));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let f = |g: f64| log_density(a, lambda, sigma, g);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..300 {
        if hi - lo <= 1e-14 * hi.abs() {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let mode = 0.5 * (lo + hi);

    Ok(GammaLikelihood {
        alpha,
        lambda,
        sigma,
        point,
        mode,
        interval: (gamma_of(a, lambda - sigma), gamma_of(a, lambda + sigma)),
        truncated_mass,
        truncated: truncated_mass > 1e-15,
    })
}
