//! The random Apollonian packing generator.
//!
//! A step draws a uniform nucleation site in the box. Sites inside (or on)
//! an existing sphere are discarded and redrawn; otherwise a sphere with the
//! largest non-overlapping radius is inserted at the site. Moments of the
//! radius distribution and the pore volume are updated in O(1) per insertion
//! and recorded at log-spaced checkpoints.

mod accumulator;
mod mask;
mod probe;
mod snapshot;

pub use accumulator::{CompensatedSum, MomentAccumulator};
pub use probe::{probe_insertions, ProbeResult, DEFAULT_PROBE_BINS};
pub use snapshot::{
    checkpoint_grid, Checkpoint, LogHistogram, SnapshotSeries, DEFAULT_HIST_BINS_PER_DECADE,
    DEFAULT_SNAPSHOTS_PER_DECADE,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, RapError, Result};
use crate::geometry::{raw_signed_gap, raw_wall_gap, unit_ball_volume, BoxDomain, PointD, Sphere};
use crate::order::Order;
use crate::spatial_index::{SphereTree, DEFAULT_LEAF_CAPACITY};
use mask::CoverageMask;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000_000;

/// Moment orders tracked by default: `{1/2, 1, 3/2, 2, 3, 4}` restricted to `[0, d]`.
pub fn default_orders(dim: usize) -> Vec<Order> {
    [
        Order::HALF,
        Order::ONE,
        Order::new(3, 2),
        Order::int(2),
        Order::int(3),
        Order::int(4),
    ]
    .into_iter()
    .filter(|o| o.value() <= dim as f64)
    .collect()
}

pub(crate) fn new_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone)]
pub struct Packing {
    domain: BoxDomain,
    tree: SphereTree,
    seed: u64,
    attempts: u64,
    max_attempts: u64,
    rng: ChaCha8Rng,
    accumulator: MomentAccumulator,
    scratch: Vec<f64>,
    mask: CoverageMask,
}

impl Packing {
    pub fn new(domain: BoxDomain, seed: u64) -> Self {
        Self::with_options(
            domain,
            seed,
            default_orders(domain.dimension()),
            DEFAULT_LEAF_CAPACITY,
        )
    }

    pub fn with_options(
        domain: BoxDomain,
        seed: u64,
        orders: Vec<Order>,
        leaf_capacity: usize,
    ) -> Self {
        let dim = domain.dimension();
        let unit = unit_ball_volume(dim as u32).expect("box dimension is at least 1");
        Packing {
            domain,
            tree: SphereTree::with_capacity(&domain, leaf_capacity),
            seed,
            attempts: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            rng: new_rng(seed),
            accumulator: MomentAccumulator::new(orders, dim as u32, domain.volume(), unit),
            scratch: vec![0.0; dim],
            mask: CoverageMask::new(dim, domain.side()),
        }
    }

    /// Rebuild a frozen packing from stored spheres (e.g. a loaded CSV).
    /// Spheres are inserted in the given order; no geometric validation is
    /// done beyond requiring each sphere to fit in the box.
    pub fn from_spheres(domain: BoxDomain, seed: u64, spheres: &[(Vec<f64>, f64)]) -> Result<Self> {
        let mut packing = Packing::new(domain, seed);
        for (i, (center, r)) in spheres.iter().enumerate() {
            if center.len() != domain.dimension() {
                return Err(domain!(
                    "sphere {i} has dimension {} (box is {})",
                    center.len(),
                    domain.dimension()
                ));
            }
            if !(*r > 0.0 && r.is_finite()) || !domain.contains(center) {
                return Err(domain!("sphere {i} is not a valid sphere inside the box"));
            }
            packing.tree.insert_raw(center, *r);
            packing.accumulator.push(*r);
        }
        Ok(packing)
    }

    pub fn set_max_attempts(&mut self, cap: u64) {
        self.max_attempts = cap.max(1);
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn tree(&self) -> &SphereTree {
        &self.tree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Nucleation attempts so far, rejections included.
    pub fn attempts(&self) -> u64 {
        self.attempts
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn radii(&self) -> &[f64] {
        self.tree.radii()
    }

    pub fn accumulator(&self) -> &MomentAccumulator {
        &self.accumulator
    }

    pub fn pore(&self) -> f64 {
        self.accumulator.pore()
    }

    pub fn packing_fraction(&self) -> f64 {
        1.0 - self.pore() / self.domain.volume()
    }

    /// Insert one sphere.
    ///
    /// Returns [`RapError::Saturation`] if `max_attempts` consecutive sites
    /// all fall inside existing spheres.
    pub fn step(&mut self) -> Result<Sphere> {
        let side = self.domain.side();
        for _ in 0..self.max_attempts {
            for x in self.scratch.iter_mut() {
                *x = self.rng.gen::<f64>() * side;
            }
            self.attempts += 1;
            if self.mask.covered(&self.scratch) {
                continue;
            }
            match self.tree.query_free(&self.scratch) {
                Err(Some(id)) => self.mask.mark(&self.scratch, &self.tree, id),
                Err(None) => {}
                Ok(found) => {
                    let r = found.radius;
                    self.tree.insert_raw(&self.scratch, r);
                    self.accumulator.push(r);
                    return Ok(Sphere {
                        center: PointD::new(self.scratch.clone())?,
                        radius: r,
                    });
                }
            }
        }
        Err(RapError::Saturation {
            attempts: self.max_attempts,
        })
    }

    /// `M_alpha = sum_k r_k^alpha` recomputed from the stored radii.
    pub fn moments(&self, alphas: &[f64]) -> Result<Vec<f64>> {
        alphas
            .iter()
            .map(|&alpha| {
                if !(alpha >= 0.0) || !alpha.is_finite() {
                    return Err(domain!(
                        "moment order must be a finite nonnegative number, got {alpha}"
                    ));
                }
                let sum: CompensatedSum = if alpha == 0.0 {
                    self.radii().iter().map(|_| 1.0).collect()
                } else if (2.0 * alpha).fract() == 0.0 {
                    let order = Order::half_int((2.0 * alpha) as u32);
                    self.radii().iter().map(|&r| order.pow(r)).collect()
                } else {
                    self.radii().iter().map(|&r| r.powf(alpha)).collect()
                };
                Ok(sum.value())
            })
            .collect()
    }

    /// Exhaustive O(n^2) audit of the packing invariants.
    pub fn audit(&self) -> AuditReport {
        audit_spheres(&self.domain, self.tree.centers_flat(), self.radii())
    }

    /// Spheres in insertion order.
    pub fn spheres(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.tree
            .centers_flat()
            .chunks_exact(self.domain.dimension())
            .zip(self.radii().iter().copied())
    }

    pub(crate) fn checkpoint(&self, with_hist: Option<&LogHistogram>) -> Checkpoint {
        Checkpoint {
            n: self.len() as u64,
            moments: self.accumulator.values().into_iter().collect(),
            pore: self.pore(),
            attempts: self.attempts,
            hist: with_hist.cloned(),
            radii: None,
        }
    }
}

/// Result of [`Packing::audit`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditReport {
    /// Pairs with `|c_i - c_j| < (r_i + r_j)(1 - 1e-12)`.
    pub overlapping_pairs: usize,
    /// Spheres whose closest contact (sphere or wall) exceeds `1e-9 r`.
    pub untouched: usize,
    /// Spheres poking outside the box.
    pub wall_crossings: usize,
    /// Largest relative contact gap observed, `min_gap / r`.
    pub worst_contact: f64,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.overlapping_pairs == 0 && self.untouched == 0 && self.wall_crossings == 0
    }
}

pub const OVERLAP_REL_TOL: f64 = 1e-12;
pub const TANGENCY_REL_TOL: f64 = 1e-9;

pub fn audit_spheres(domain: &BoxDomain, centers: &[f64], radii: &[f64]) -> AuditReport {
    let dim = domain.dimension();
    let side = domain.side();
    let n = radii.len();
    let mut closest: Vec<f64> = (0..n)
        .map(|i| raw_wall_gap(&centers[i * dim..(i + 1) * dim], side) - radii[i])
        .collect();
    let wall_crossings = closest
        .iter()
        .filter(|&&g| g < -OVERLAP_REL_TOL * side)
        .count();
    let mut overlapping_pairs = 0;
    for i in 0..n {
        let ci = &centers[i * dim..(i + 1) * dim];
        for j in (i + 1)..n {
            let cj = &centers[j * dim..(j + 1) * dim];
            let sum = radii[i] + radii[j];
            let gap = raw_signed_gap(ci, cj, sum);
            if gap < -OVERLAP_REL_TOL * sum {
                overlapping_pairs += 1;
            }
            let g = gap.abs();
            if g < closest[i].abs() {
                closest[i] = g;
            }
            if g < closest[j].abs() {
                closest[j] = g;
            }
        }
    }
    let mut untouched = 0;
    let mut worst_contact: f64 = 0.0;
    for (g, r) in closest.iter().zip(radii) {
        let rel = g.abs() / r;
        worst_contact = worst_contact.max(rel);
        if rel > TANGENCY_REL_TOL {
            untouched += 1;
        }
    }
    AuditReport {
        overlapping_pairs,
        untouched,
        wall_crossings,
        worst_contact,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackerConfig {
    pub dim: usize,
    pub side: f64,
    pub n: u64,
    pub seed: u64,
    pub orders: Vec<Order>,
    pub snapshots_per_decade: u32,
    pub hist_bins_per_decade: u32,
    /// Record a radius histogram at every checkpoint.
    pub histograms: bool,
    pub leaf_capacity: usize,
    pub max_attempts: u64,
}

impl PackerConfig {
    pub fn new(dim: usize, side: f64, n: u64, seed: u64) -> Self {
        PackerConfig {
            dim,
            side,
            n,
            seed,
            orders: default_orders(dim),
            snapshots_per_decade: DEFAULT_SNAPSHOTS_PER_DECADE,
            hist_bins_per_decade: DEFAULT_HIST_BINS_PER_DECADE,
            histograms: true,
            leaf_capacity: DEFAULT_LEAF_CAPACITY,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.dim) {
            return Err(domain!("dimension must be 2, 3 or 4, got {}", self.dim));
        }
        BoxDomain::new(self.dim, self.side)?;
        if self.snapshots_per_decade == 0 || self.hist_bins_per_decade == 0 {
            return Err(domain!(
                "snapshot and histogram resolutions must be positive"
            ));
        }
        Ok(())
    }
}

/// Grow a packing to `config.n` spheres, recording the checkpoint series.
/// Output is a pure function of `config`.
pub fn run(config: &PackerConfig) -> Result<(Packing, SnapshotSeries)> {
    config.validate()?;
    let domain = BoxDomain::new(config.dim, config.side)?;
    let mut packing = Packing::with_options(
        domain,
        config.seed,
        config.orders.clone(),
        config.leaf_capacity,
    );
    packing.set_max_attempts(config.max_attempts);

    let grid = checkpoint_grid(config.n, config.snapshots_per_decade);
    let mut hist = config
        .histograms
        .then(|| LogHistogram::new(config.hist_bins_per_decade));
    let mut series = SnapshotSeries::default();
    for &target in &grid {
        while (packing.len() as u64) < target {
            let sphere = packing.step()?;
            if let Some(h) = hist.as_mut() {
                h.add(sphere.radius);
            }
        }
        series.checkpoints.push(packing.checkpoint(hist.as_ref()));
    }
    if let Some(last) = series.checkpoints.last_mut() {
        last.radii = Some(packing.radii().to_vec());
    }
    Ok((packing, series))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, n: u64, seed: u64) -> PackerConfig {
        PackerConfig::new(d, 100.0, n, seed)
    }

    #[test]
    fn empty_run() {
        let (p, s) = run(&cfg(2, 0, 1)).unwrap();
        assert!(s.checkpoints.is_empty());
        assert_eq!(p.pore(), 100.0 * 100.0);
    }

    #[test]
    fn first_insertion_takes_wall_gap() {
        let domain = BoxDomain::new(3, 100.0).unwrap();
        let mut p = Packing::new(domain, 9);
        let s = p.step().unwrap();
        assert_eq!(s.radius, raw_wall_gap(s.center.coords(), 100.0));
        assert_eq!(p.attempts(), 1);
    }

    #[test]
    fn rejected_sites_count_as_attempts() {
        let domain = BoxDomain::new(2, 100.0).unwrap();
        let mut p = Packing::new(domain, 4);
        for _ in 0..200 {
            p.step().unwrap();
        }
        // With ~85% of the box already covered, some draws must have failed.
        assert!(p.attempts() > 200);
    }

    #[test]
    fn saturation_is_reported() {
        let domain = BoxDomain::new(2, 10.0).unwrap();
        let mut p = Packing::from_spheres(domain, 0, &[(vec![5.0, 5.0], 5.0)]).unwrap();
        p.set_max_attempts(1);
        let mut saw = false;
        for _ in 0..100 {
            if let Err(RapError::Saturation { attempts }) = p.step() {
                assert_eq!(attempts, 1);
                saw = true;
                break;
            }
        }
        assert!(saw);
    }

    #[test]
    fn same_seed_same_radii() {
        let (a, _) = run(&cfg(2, 2000, 17)).unwrap();
        let (b, _) = run(&cfg(2, 2000, 17)).unwrap();
        let (c, _) = run(&cfg(2, 2000, 18)).unwrap();
        assert_eq!(a.radii(), b.radii());
        assert_ne!(a.radii(), c.radii());
    }

    /// Plain rejection sampling with a linear scan, sharing only the RNG.
    fn literal_packing(dim: usize, side: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>, u64) {
        let mut rng = new_rng(seed);
        let (mut centers, mut radii) = (Vec::new(), Vec::new());
        let mut attempts = 0;
        while radii.len() < n {
            let p: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * side).collect();
            attempts += 1;
            let mut r = p
                .iter()
                .map(|&x| x.min(side - x))
                .fold(f64::INFINITY, f64::min);
            for (c, &rk) in centers.chunks_exact(dim).zip(&radii) {
                let d2: f64 = c.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum();
                r = r.min(d2.sqrt() - rk);
            }
            if r > 0.0 {
                centers.extend_from_slice(&p);
                radii.push(r);
            }
        }
        (centers, radii, attempts)
    }

    #[test]
    fn matches_literal_rejection_sampling() {
        for (dim, n) in [(2, 4000), (3, 2000), (4, 1500)] {
            let (p, _) = run(&cfg(dim, n, 21)).unwrap();
            let (centers, radii, attempts) = literal_packing(dim, 100.0, n as usize, 21);
            assert_eq!(p.attempts(), attempts, "d={dim}");
            assert_eq!(p.radii(), &radii[..], "d={dim}");
            assert_eq!(p.tree().centers_flat(), &centers[..], "d={dim}");
        }
    }

    #[test]
    fn moments_examples() {
        let domain = BoxDomain::new(2, 10.0).unwrap();
        let p = Packing::from_spheres(domain, 0, &[(vec![5.0, 5.0], 2.0)]).unwrap();
        assert_eq!(
            p.moments(&[0.0, 3.0, 1.5]).unwrap(),
            vec![1.0, 8.0, 2f64.powf(1.5)]
        );
        assert!(p.moments(&[-1.0]).is_err());
    }

    #[test]
    fn streaming_and_recomputed_moments_agree() {
        let (p, s) = run(&cfg(3, 5000, 2)).unwrap();
        let last = s.last().unwrap();
        for (order, value) in &last.moments {
            let direct = p.moments(&[order.value()]).unwrap()[0];
            assert!(((value - direct) / direct).abs() < 1e-12, "{order}");
        }
        assert_eq!(last.n, 5000);
        assert_eq!(last.radii.as_ref().unwrap().len(), 5000);
    }

    #[test]
    fn small_packings_are_valid() {
        for d in 2..=4 {
            let (p, s) = run(&cfg(d, 1500, d as u64)).unwrap();
            let audit = p.audit();
            assert!(audit.is_clean(), "d={d}: {audit:?}");
            let pores: Vec<f64> = s.checkpoints.iter().map(|c| c.pore).collect();
            assert!(pores.windows(2).all(|w| w[1] < w[0]));
            assert!(pores.iter().all(|&x| x > 0.0));
            assert!(p.radii().iter().all(|&r| r <= 50.0));
        }
    }

    #[test]
    fn invalid_dimension_rejected() {
        assert!(run(&cfg(5, 10, 0)).is_err());
        assert!(run(&cfg(1, 10, 0)).is_err());
    }
}
