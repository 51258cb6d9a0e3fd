use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::order::Order;

pub const DEFAULT_SNAPSHOTS_PER_DECADE: u32 = 64;
pub const DEFAULT_HIST_BINS_PER_DECADE: u32 = 256;

/// Log-spaced checkpoint grid: `round(10^(j / per_decade))` for `j = 0, 1, ..`,
/// deduplicated, capped at `n_max`, and always ending at `n_max`.
pub fn checkpoint_grid(n_max: u64, per_decade: u32) -> Vec<u64> {
    let mut grid = Vec::new();
    if n_max == 0 {
        return grid;
    }
    let per_decade = per_decade.max(1) as f64;
    let mut j = 0u32;
    loop {
        let n = 10f64.powf(j as f64 / per_decade).round() as u64;
        if n >= n_max {
            break;
        }
        if grid.last() != Some(&n) {
            grid.push(n);
        }
        j += 1;
    }
    grid.push(n_max);
    grid
}

/// Counts of radii in logarithmic bins `[10^(k/b), 10^((k+1)/b))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHistogram {
    pub bins_per_decade: u32,
    /// Index `k` of the first stored bin.
    pub first: i64,
    pub counts: Vec<u64>,
}

impl LogHistogram {
    pub fn new(bins_per_decade: u32) -> Self {
        LogHistogram {
            bins_per_decade: bins_per_decade.max(1),
            first: 0,
            counts: Vec::new(),
        }
    }

    pub fn bin_index(&self, r: f64) -> i64 {
        (self.bins_per_decade as f64 * r.log10()).floor() as i64
    }

    pub fn edge(&self, k: i64) -> f64 {
        10f64.powf(k as f64 / self.bins_per_decade as f64)
    }

    pub fn add(&mut self, r: f64) {
        let k = self.bin_index(r);
        if self.counts.is_empty() {
            self.first = k;
            self.counts.push(1);
            return;
        }
        if k < self.first {
            let grow = (self.first - k) as usize;
            let mut fresh = vec![0; grow];
            fresh.extend_from_slice(&self.counts);
            self.counts = fresh;
            self.first = k;
        }
        let idx = (k - self.first) as usize;
        if idx >= self.counts.len() {
            self.counts.resize(idx + 1, 0);
        }
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(R_k, #{r >= R_k})` at every stored lower bin edge, ascending in `R`.
    pub fn counts_above_edges(&self) -> Vec<(f64, u64)> {
        let mut out = Vec::with_capacity(self.counts.len());
        let mut above: u64 = self.total();
        for (i, &c) in self.counts.iter().enumerate() {
            out.push((self.edge(self.first + i as i64), above));
            above -= c;
        }
        out
    }

    /// Number of radii at or above the lower edge of bin `k`.
    pub fn count_at_or_above_bin(&self, k: i64) -> u64 {
        if self.counts.is_empty() {
            return 0;
        }
        if k <= self.first {
            return self.total();
        }
        let start = (k - self.first) as usize;
        self.counts.iter().skip(start).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub n: u64,
    #[serde(rename = "M")]
    pub moments: BTreeMap<Order, f64>,
    pub pore: f64,
    #[serde(default)]
    pub attempts: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hist: Option<LogHistogram>,
    /// Full radius list; only kept in memory for the final checkpoint.
    #[serde(skip)]
    pub radii: Option<Vec<f64>>,
}

impl Checkpoint {
    pub fn moment(&self, order: Order) -> Option<f64> {
        if order == Order::ZERO {
            return Some(self.n as f64);
        }
        self.moments.get(&order).copied()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSeries {
    pub checkpoints: Vec<Checkpoint>,
}

impl SnapshotSeries {
    pub fn grid(&self) -> Vec<u64> {
        self.checkpoints.iter().map(|c| c.n).collect()
    }

    pub fn at(&self, n: u64) -> Option<&Checkpoint> {
        self.checkpoints
            .binary_search_by_key(&n, |c| c.n)
            .ok()
            .map(|i| &self.checkpoints[i])
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// Orders present in every checkpoint.
    pub fn orders(&self) -> Vec<Order> {
        self.checkpoints
            .first()
            .map(|c| c.moments.keys().copied().collect())
            .unwrap_or_default()
    }

    /// `(n, M_alpha(n))` over the whole series.
    pub fn moment_series(&self, order: Order) -> Option<Vec<(f64, f64)>> {
        self.checkpoints
            .iter()
            .map(|c| c.moment(order).map(|m| (c.n as f64, m)))
            .collect()
    }

    pub fn pore_series(&self) -> Vec<(f64, f64)> {
        self.checkpoints
            .iter()
            .map(|c| (c.n as f64, c.pore))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_strictly_increasing_and_log_spaced() {
        let g = checkpoint_grid(1_000_000, 64);
        assert_eq!(g.first(), Some(&1));
        assert_eq!(g.last(), Some(&1_000_000));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let above_1000 = g.iter().filter(|&&n| (1000..10_000).contains(&n)).count();
        assert_eq!(above_1000, 64);
        assert!(checkpoint_grid(0, 64).is_empty());
        assert_eq!(checkpoint_grid(1, 64), vec![1]);
        assert_eq!(checkpoint_grid(7, 64).last(), Some(&7));
    }

    #[test]
    fn histogram_counts_above_edges() {
        let mut h = LogHistogram::new(10);
        for r in [0.5, 1.0, 2.0, 50.0, 0.011] {
            h.add(r);
        }
        assert_eq!(h.total(), 5);
        let cdf = h.counts_above_edges();
        assert_eq!(cdf.first().unwrap().1, 5);
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1));
        assert_eq!(h.count_at_or_above_bin(h.bin_index(1.0)), 3);
        assert_eq!(h.count_at_or_above_bin(h.bin_index(60.0) + 1), 0);
    }
}
