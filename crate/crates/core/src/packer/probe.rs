use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Packing;

pub const DEFAULT_PROBE_BINS: usize = 256;
const CHUNK: u64 = 1 << 14;

/// Outcome of test insertions into a frozen packing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub attempts: u64,
    pub inside_rejections: u64,
    pub seed: u64,
    /// Maximal radii of accepted sites, sorted ascending.
    pub radii: Vec<f64>,
    /// `(ln r bin center, -dP/d ln r)` over [`DEFAULT_PROBE_BINS`] equal bins in `ln r`.
    pub log_histogram: Vec<(f64, f64)>,
}

impl ProbeResult {
    pub fn accepted(&self) -> usize {
        self.radii.len()
    }

    /// Empirical `P(r' > r)` among accepted probes.
    pub fn cdf(&self, r: f64) -> f64 {
        if self.radii.is_empty() {
            return 0.0;
        }
        let at_or_below = self.radii.partition_point(|&x| x <= r);
        (self.radii.len() - at_or_below) as f64 / self.radii.len() as f64
    }

    /// Equal-width bins in `ln r` spanning the accepted radii.
    pub fn log_bins(&self, bins: usize) -> Vec<(f64, f64)> {
        let bins = bins.max(1);
        let (Some(&lo), Some(&hi)) = (self.radii.first(), self.radii.last()) else {
            return Vec::new();
        };
        let (llo, lhi) = (lo.ln(), hi.ln());
        let width = if lhi > llo {
            (lhi - llo) / bins as f64
        } else {
            1.0
        };
        (0..=bins)
            .map(|k| llo + k as f64 * width)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Empirical density `-dP/d ln r` on the given `ln r` bins.
    pub fn density_on(&self, bins: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let total = self.radii.len().max(1) as f64;
        let last = bins.len().saturating_sub(1);
        bins.iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let lo = self.radii.partition_point(|&r| r.ln() < a);
                // Close the last bin on the right so the maximum is counted.
                let hi = if k == last {
                    self.radii.len()
                } else {
                    self.radii.partition_point(|&r| r.ln() < b)
                };
                (0.5 * (a + b), (hi - lo) as f64 / (total * (b - a)))
            })
            .collect()
    }
}

/// Draw `count` uniform sites in the box of a frozen packing and record the
/// maximal radius at every site that lies outside all spheres.
///
/// Sites are processed in fixed chunks with one ChaCha stream per chunk, so
/// the result does not depend on the number of worker threads.
pub fn probe_insertions(packing: &Packing, count: u64, seed: u64) -> ProbeResult {
    let dim = packing.domain().dimension();
    let side = packing.domain().side();
    let tree = packing.tree();
    let chunks = count.div_ceil(CHUNK);
    let per_chunk: Vec<(u64, Vec<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let todo = CHUNK.min(count - chunk * CHUNK);
            let mut point = vec![0.0; dim];
            let mut radii = Vec::with_capacity(todo as usize);
            let mut inside = 0;
            for _ in 0..todo {
                for x in point.iter_mut() {
                    *x = rng.gen::<f64>() * side;
                }
                let r = tree.query_unchecked(&point).radius;
                if r > 0.0 {
                    radii.push(r);
                } else {
                    inside += 1;
                }
            }
            (inside, radii)
        })
        .collect();

    let inside_rejections = per_chunk.iter().map(|(i, _)| i).sum();
    let mut radii: Vec<f64> = per_chunk.into_iter().flat_map(|(_, r)| r).collect();
    radii.sort_by(f64::total_cmp);
    let mut result = ProbeResult {
        attempts: count,
        inside_rejections,
        seed,
        radii,
        log_histogram: Vec::new(),
    };
    let bins = result.log_bins(DEFAULT_PROBE_BINS);
    result.log_histogram = result.density_on(&bins);
    result
}
