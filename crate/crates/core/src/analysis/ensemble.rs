use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{RapError, Result};
use crate::order::Order;
use crate::packer::SnapshotSeries;

/// Mean and standard error of the mean over replicas, per checkpoint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

impl MeanSe {
    /// Column statistics of `rows[replica][checkpoint]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> MeanSe {
        let r = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        let mut out = MeanSe {
            mean: vec![0.0; width],
            se: vec![0.0; width],
        };
        for j in 0..width {
            let mean = rows.iter().map(|row| row[j]).sum::<f64>() / r as f64;
            let var = if r > 1 {
                rows.iter().map(|row| (row[j] - mean).powi(2)).sum::<f64>() / (r - 1) as f64
            } else {
                0.0
            };
            out.mean[j] = mean;
            out.se[j] = (var / r as f64).sqrt();
        }
        out
    }
}

/// Ensemble-averaged radius CDF at one checkpoint: `N_n(r' >= R)` at the
/// log-histogram bin edges `R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleCdf {
    pub n: u64,
    pub edges: Vec<f64>,
    pub counts: MeanSe,
}

/// Statistics of several replicas sharing one checkpoint grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub replica_count: usize,
    pub grid: Vec<u64>,
    pub moments: BTreeMap<Order, MeanSe>,
    pub pore: MeanSe,
    /// Per-checkpoint CDFs, where every replica stored a histogram.
    pub cdfs: Vec<EnsembleCdf>,
    /// The replicas themselves, for resampling and per-replica estimators.
    #[serde(skip)]
    pub replicas: Vec<SnapshotSeries>,
}

/// Which series an exponent is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    /// `M_alpha(n)`, growing as `n^lambda_alpha` when `lambda_alpha > 0`.
    Moment,
    /// `Phi_n`, decaying as `n^lambda_d`.
    Pore,
}

impl EnsembleSeries {
    pub fn from_replicas(replicas: Vec<SnapshotSeries>) -> Result<Self> {
        let Some(first) = replicas.first() else {
            return Err(RapError::Aggregation("no replicas".into()));
        };
        let grid = first.grid();
        for (i, rep) in replicas.iter().enumerate() {
            if rep.grid() != grid {
                return Err(RapError::Aggregation(format!(
                    "replica {i} has a different checkpoint grid ({} vs {} checkpoints)",
                    rep.checkpoints.len(),
                    grid.len()
                )));
            }
        }
        let orders = first.orders();
        let mut moments = BTreeMap::new();
        for &order in &orders {
            let rows: Option<Vec<Vec<f64>>> = replicas
                .iter()
                .map(|rep| rep.checkpoints.iter().map(|c| c.moment(order)).collect())
                .collect();
            let rows = rows.ok_or_else(|| RapError::Aggregation(format!("M_{order} missing in some replica")))?;
            moments.insert(order, MeanSe::from_rows(&rows));
        }
        let pore_rows: Vec<Vec<f64>> = replicas
            .iter()
            .map(|rep| rep.checkpoints.iter().map(|c| c.pore).collect())
            .collect();
        let pore = MeanSe::from_rows(&pore_rows);

        let mut cdfs = Vec::new();
        for (j, &n) in grid.iter().enumerate() {
            let hists: Option<Vec<_>> = replicas.iter().map(|rep| rep.checkpoints[j].hist.as_ref()).collect();
            let Some(hists) = hists else { continue };
            let Some(bpd) = hists.first().map(|h| h.bins_per_decade) else { continue };
            if hists.iter().any(|h| h.bins_per_decade != bpd) {
                return Err(RapError::Aggregation(format!("histogram resolutions differ at n={n}")));
            }
            let nonempty = hists.iter().filter(|h| !h.counts.is_empty());
            let lo = nonempty.clone().map(|h| h.first).min();
            let hi = nonempty.map(|h| h.first + h.counts.len() as i64).max();
            let (Some(lo), Some(hi)) = (lo, hi) else { continue };
            let edges: Vec<f64> = (lo..=hi).map(|k| hists[0].edge(k)).collect();
            let rows: Vec<Vec<f64>> = hists
                .iter()
                .map(|h| (lo..=hi).map(|k| h.count_at_or_above_bin(k) as f64).collect())
                .collect();
            cdfs.push(EnsembleCdf {
                n,
                edges,
                counts: MeanSe::from_rows(&rows),
            });
        }

        Ok(EnsembleSeries {
            replica_count: replicas.len(),
            grid,
            moments,
            pore,
            cdfs,
            replicas,
        })
    }

    pub fn orders(&self) -> Vec<Order> {
        self.moments.keys().copied().collect()
    }

    /// `(n, mean)` of the chosen series.
    pub fn mean_series(&self, kind: SeriesKind, alpha: Order) -> Result<Vec<(f64, f64)>> {
        let stats = self.stats(kind, alpha)?;
        Ok(self.grid.iter().zip(&stats.mean).map(|(&n, &m)| (n as f64, m)).collect())
    }

    pub fn stats(&self, kind: SeriesKind, alpha: Order) -> Result<&MeanSe> {
        match kind {
            SeriesKind::Pore => Ok(&self.pore),
            SeriesKind::Moment => self
                .moments
                .get(&alpha)
                .ok_or_else(|| RapError::Precondition(format!("M_{alpha} was not recorded"))),
        }
    }

    /// One replica's `(n, value)` series.
    pub fn replica_series(&self, replica: usize, kind: SeriesKind, alpha: Order) -> Result<Vec<(f64, f64)>> {
        let rep = self
            .replicas
            .get(replica)
            .ok_or_else(|| RapError::Precondition(format!("replica {replica} not loaded")))?;
        match kind {
            SeriesKind::Pore => Ok(rep.pore_series()),
            SeriesKind::Moment => rep
                .moment_series(alpha)
                .ok_or_else(|| RapError::Precondition(format!("M_{alpha} was not recorded"))),
        }
    }

    pub fn cdf_at(&self, n: u64) -> Option<&EnsembleCdf> {
        self.cdfs.iter().find(|c| c.n == n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packer::{run, PackerConfig};

    fn replicas(n: u64, count: u64) -> Vec<SnapshotSeries> {
        (0..count)
            .map(|s| run(&PackerConfig::new(2, 1.0, n, 100 + s)).unwrap().1)
            .collect()
    }

    #[test]
    fn mean_and_standard_error() {
        let s = MeanSe::from_rows(&[vec![1.0, 10.0], vec![3.0, 10.0]]);
        assert_eq!(s.mean, vec![2.0, 10.0]);
        assert_eq!(s.se, vec![1.0, 0.0]);
        let single = MeanSe::from_rows(&[vec![4.0]]);
        assert_eq!(single.se, vec![0.0]);
    }

    #[test]
    fn aggregates_replicas() {
        let reps = replicas(2000, 3);
        let e = EnsembleSeries::from_replicas(reps.clone()).unwrap();
        assert_eq!(e.replica_count, 3);
        assert_eq!(e.grid, reps[0].grid());
        let m1 = &e.moments[&Order::ONE];
        let last = e.grid.len() - 1;
        let manual: f64 = reps.iter().map(|r| r.last().unwrap().moments[&Order::ONE]).sum::<f64>() / 3.0;
        assert!((m1.mean[last] - manual).abs() < 1e-12 * manual);
        assert!(m1.se.iter().all(|s| s.is_finite()));
        let cdf = e.cdf_at(2000).unwrap();
        assert_eq!(cdf.counts.mean[0], 2000.0);
        assert_eq!(*cdf.counts.mean.last().unwrap(), 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let mut reps = replicas(500, 2);
        reps[1].checkpoints.pop();
        assert!(matches!(EnsembleSeries::from_replicas(reps), Err(RapError::Aggregation(_))));
        assert!(EnsembleSeries::from_replicas(Vec::new()).is_err());
    }
}
