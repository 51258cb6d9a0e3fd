use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::order::Order;

use super::derivative::log_derivative;
use super::ensemble::{EnsembleSeries, SeriesKind};
use super::fit::{fit_asymptote, FitResult};

/// Checkpoints below this are excluded from exponent fits by default.
pub const DEFAULT_WINDOW_START: f64 = 1e3;

/// Series an exponent of order `alpha` is read from in dimension `d`:
/// the pore volume for `alpha = d`, the moment itself otherwise.
pub fn series_kind_for(alpha: Order, d: u32) -> SeriesKind {
    if alpha == Order::int(d) {
        SeriesKind::Pore
    } else {
        SeriesKind::Moment
    }
}

/// Fit of one exponent from an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub alpha: Order,
    pub kind: SeriesKind,
    /// `[n0, n1]` actually covered by the fitted points.
    pub window: (u64, u64),
    pub fit: FitResult,
    /// `(n, d ln y / d ln n, standard error)` of the fitted points.
    pub points: Vec<(f64, f64, f64)>,
}

/// Log-derivative of the ensemble mean of the chosen series, weighted by the
/// standard error of the per-replica log-derivatives, fitted to
/// `lambda + b (ln n)^c` over the checkpoints inside `window`.
///
/// With fewer than two replicas the weights are uniform and `sigma` is
/// scaled by the residual spread instead.
pub fn exponent_fit(ensemble: &EnsembleSeries, kind: SeriesKind, alpha: Order, window: (f64, f64)) -> Result<ExponentFit> {
    let mean = ensemble.mean_series(kind, alpha)?;
    let slope = log_derivative(&mean)?;
    let keep: Vec<usize> = (0..slope.len())
        .filter(|&i| slope[i].0 >= window.0 && slope[i].0 <= window.1)
        .collect();
    if keep.len() < 10 {
        return Err(domain!(
            "window [{}, {}] holds {} checkpoints; the fit needs 10",
            window.0,
            window.1,
            keep.len()
        ));
    }

    let replicas = ensemble.replicas.len();
    let mut se: Vec<f64> = Vec::new();
    if replicas >= 2 {
        let per_replica = (0..replicas)
            .map(|k| log_derivative(&ensemble.replica_series(k, kind, alpha)?))
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<f64> = keep
            .iter()
            .map(|&i| {
                let vals: Vec<f64> = per_replica.iter().map(|s| s[i].1).collect();
                let m = vals.iter().sum::<f64>() / replicas as f64;
                let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (replicas - 1) as f64;
                (var / replicas as f64).sqrt()
            })
            .collect();
        let floor = raw.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
        if floor.is_finite() {
            se = raw.into_iter().map(|s| s.max(floor)).collect();
        }
    }
    let uniform = se.is_empty();
    if uniform {
        se = vec![1.0; keep.len()];
    }

    let pts: Vec<(f64, f64)> = keep.iter().map(|&i| slope[i]).collect();
    let mut fit = fit_asymptote(&pts, &se)?;
    if uniform {
        fit.sigma_lambda *= fit.reduced_chi2().min(1.0).sqrt();
    }
    let points = pts.iter().zip(&se).map(|(&(n, y), &s)| (n, y, s)).collect();
    Ok(ExponentFit {
        alpha,
        kind,
        window: (pts[0].0 as u64, pts[pts.len() - 1].0 as u64),
        fit,
        points,
    })
}
