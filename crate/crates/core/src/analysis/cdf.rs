use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, RapError, Result};

use super::ensemble::EnsembleSeries;

/// Ensemble-averaged `N_n(r' > r)`: `(0, n)` followed by the histogram edges.
pub fn radius_cdf(ensemble: &EnsembleSeries, n: u64) -> Result<Vec<(f64, f64)>> {
    let cdf = ensemble
        .cdf_at(n)
        .ok_or_else(|| RapError::Precondition(format!("no radius histogram at checkpoint n={n}")))?;
    let mut out = Vec::with_capacity(cdf.edges.len() + 1);
    out.push((0.0, n as f64));
    out.extend(cdf.edges.iter().copied().zip(cdf.counts.mean.iter().copied()));
    Ok(out)
}

/// Power-law slope of the radius CDF, `N(r' > r) ~ r^(1 - gamma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    pub n: u64,
    pub window: (f64, f64),
    pub points: usize,
    pub slope: f64,
    pub gamma: f64,
    /// Bootstrap standard deviation of `gamma` over replica resamples.
    pub sigma_gamma: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Per-replica counts `N(r' >= R)` at every edge inside the window.
fn replica_counts(ensemble: &EnsembleSeries, n: u64, window: (f64, f64)) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let cdf = ensemble
        .cdf_at(n)
        .ok_or_else(|| RapError::Precondition(format!("no radius histogram at checkpoint n={n}")))?;
    let idx: Vec<usize> = (0..cdf.edges.len())
        .filter(|&k| cdf.edges[k] >= window.0 && cdf.edges[k] <= window.1 && cdf.counts.mean[k] > 0.0)
        .collect();
    if idx.len() < 3 {
        return Err(domain!(
            "slope window [{}, {}] holds {} usable edges at n={n}",
            window.0,
            window.1,
            idx.len()
        ));
    }
    let j = ensemble
        .grid
        .iter()
        .position(|&g| g == n)
        .ok_or_else(|| RapError::Precondition(format!("n={n} is not a checkpoint")))?;
    let log_edges: Vec<f64> = idx.iter().map(|&k| cdf.edges[k].ln()).collect();
    let rows = if ensemble.replicas.is_empty() {
        vec![idx.iter().map(|&k| cdf.counts.mean[k]).collect()]
    } else {
        ensemble
            .replicas
            .iter()
            .map(|rep| {
                let h = rep.checkpoints[j].hist.as_ref().expect("histogram present in every replica");
                idx.iter()
                    .map(|&k| {
                        let bin = h.bin_index(cdf.edges[k] * (1.0 + 1e-12));
                        h.count_at_or_above_bin(bin) as f64
                    })
                    .collect()
            })
            .collect()
    };
    Ok((log_edges, rows))
}

fn slope_of_mean(log_edges: &[f64], rows: &[&Vec<f64>]) -> Option<f64> {
    let r = rows.len() as f64;
    let mut xs = Vec::with_capacity(log_edges.len());
    let mut ys = Vec::with_capacity(log_edges.len());
    for (k, &x) in log_edges.iter().enumerate() {
        let mean = rows.iter().map(|row| row[k]).sum::<f64>() / r;
        if mean > 0.0 {
            xs.push(x);
            ys.push(mean.ln());
        }
    }
    (xs.len() >= 3).then(|| ols_slope(&xs, &ys))
}

/// Least-squares slope of `ln N` against `ln r` over `window`, with a
/// bootstrap over replicas (fixed `seed`) for the uncertainty of `gamma`.
pub fn cdf_slope(ensemble: &EnsembleSeries, n: u64, window: (f64, f64), bootstrap: usize, seed: u64) -> Result<SlopeEstimate> {
    let (log_edges, rows) = replica_counts(ensemble, n, window)?;
    let all: Vec<&Vec<f64>> = rows.iter().collect();
    let slope = slope_of_mean(&log_edges, &all).ok_or_else(|| domain!("empty slope window"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gammas = Vec::with_capacity(bootstrap);
    if rows.len() > 1 {
        for _ in 0..bootstrap {
            let pick: Vec<&Vec<f64>> = (0..rows.len()).map(|_| &rows[rng.gen_range(0..rows.len())]).collect();
            if let Some(s) = slope_of_mean(&log_edges, &pick) {
                gammas.push(1.0 - s);
            }
        }
    }
    let sigma_gamma = if gammas.len() > 1 {
        let m = gammas.iter().sum::<f64>() / gammas.len() as f64;
        (gammas.iter().map(|g| (g - m).powi(2)).sum::<f64>() / (gammas.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(SlopeEstimate {
        n,
        window,
        points: log_edges.len(),
        slope,
        gamma: 1.0 - slope,
        sigma_gamma,
        bootstrap,
        seed,
    })
}

/// Local slopes `1 - d ln N / d ln r` between neighbouring CDF edges, for
/// plotting the running fractal dimension.
pub fn local_gamma(cdf: &[(f64, f64)]) -> Vec<(f64, f64)> {
    cdf.windows(2)
        .filter(|w| w[0].0 > 0.0 && w[0].1 > 0.0 && w[1].1 > 0.0)
        .map(|w| {
            let slope = (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln());
            ((w[0].0 * w[1].0).sqrt(), 1.0 - slope)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packer::{run, LogHistogram, PackerConfig, SnapshotSeries};

    #[test]
    fn cdf_endpoints() {
        let reps: Vec<SnapshotSeries> = (0..2)
            .map(|s| run(&PackerConfig::new(2, 10.0, 3000, s)).unwrap().1)
            .collect();
        let e = EnsembleSeries::from_replicas(reps).unwrap();
        let cdf = radius_cdf(&e, 3000).unwrap();
        assert_eq!(cdf[0], (0.0, 3000.0));
        assert_eq!(cdf[1].1, 3000.0);
        let last = cdf.last().unwrap();
        assert_eq!(last.1, 0.0);
        assert!(last.0 <= 5.0 * 10f64.powf(1.0 / 256.0));
        assert!(radius_cdf(&e, 2999).is_err());
    }

    /// Ensemble whose replicas hold exact power-law radii `r_k = k^(-1/(gamma-1))`.
    fn power_law_ensemble(gamma: f64, n: u64, replicas: usize) -> EnsembleSeries {
        let reps = (0..replicas)
            .map(|s| {
                let mut h = LogHistogram::new(64);
                for k in 1..=n {
                    // A slight per-replica jitter keeps the bootstrap honest.
                    let r = (k as f64 + 0.1 * s as f64).powf(-1.0 / (gamma - 1.0));
                    h.add(r);
                }
                let cp = crate::packer::Checkpoint {
                    n,
                    moments: Default::default(),
                    pore: 1.0,
                    attempts: n,
                    hist: Some(h),
                    radii: None,
                };
                SnapshotSeries { checkpoints: vec![cp] }
            })
            .collect();
        EnsembleSeries::from_replicas(reps).unwrap()
    }

    #[test]
    fn recovers_exact_power_law_slope() {
        let e = power_law_ensemble(2.5, 200_000, 4);
        let est = cdf_slope(&e, 200_000, (1e-3, 0.1), 100, 1).unwrap();
        assert!((est.gamma - 2.5).abs() < 0.01, "{est:?}");
        assert!(est.sigma_gamma < 0.01);
        assert_eq!(est, cdf_slope(&e, 200_000, (1e-3, 0.1), 100, 1).unwrap());
        assert!(cdf_slope(&e, 200_000, (10.0, 20.0), 10, 1).is_err());
    }

    #[test]
    fn local_gamma_of_power_law() {
        let cdf: Vec<(f64, f64)> = (1..20).map(|k| (k as f64, (k as f64).powf(-1.5))).collect();
        for (_, g) in local_gamma(&cdf) {
            assert!((g - 2.5).abs() < 1e-12);
        }
    }
}
