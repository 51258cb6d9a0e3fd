//! Multi-level bitmask of grid cells known to lie inside a single sphere.
//!
//! A site falling in a marked cell is rejected without touching the tree.
//! Cells are marked lazily from the covering sphere of a rejected site, so
//! the mask only changes which rejections are cheap, never which sites are
//! rejected.

use crate::spatial_index::SphereTree;

/// Bits per level; bounds memory to `levels * 2^BUDGET_BITS / 8` bytes.
const BUDGET_BITS: u32 = 26;
/// Safety factor on the containment test, against rounding in corner distances.
const CONTAIN_TOL: f64 = 1e-12;

#[derive(Clone)]
struct Level {
    /// Cells per axis, a power of two.
    res: u64,
    bits: Vec<u64>,
}

#[derive(Clone)]
pub(crate) struct CoverageMask {
    dim: usize,
    side: f64,
    levels: Vec<Level>,
    cell: Vec<u64>,
}

impl std::fmt::Debug for CoverageMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoverageMask")
            .field("dim", &self.dim)
            .field("levels", &self.levels.len())
            .finish()
    }
}

impl CoverageMask {
    pub(crate) fn new(dim: usize, side: f64) -> Self {
        let finest = (BUDGET_BITS / dim as u32).max(1);
        let levels = (1..=finest)
            .map(|k| {
                let res = 1u64 << k;
                let cells = res.pow(dim as u32);
                Level {
                    res,
                    bits: vec![0; cells.div_ceil(64) as usize],
                }
            })
            .collect();
        CoverageMask {
            dim,
            side,
            levels,
            cell: vec![0; dim],
        }
    }

    #[inline]
    fn index(&self, level: &Level, point: &[f64]) -> u64 {
        let scale = level.res as f64 / self.side;
        let mut idx = 0u64;
        for &x in point {
            let c = ((x * scale) as u64).min(level.res - 1);
            idx = idx * level.res + c;
        }
        idx
    }

    /// True if `point` lies in a cell already known to be covered.
    #[inline]
    pub(crate) fn covered(&self, point: &[f64]) -> bool {
        self.levels.iter().any(|level| {
            let i = self.index(level, point);
            level.bits[(i >> 6) as usize] & (1 << (i & 63)) != 0
        })
    }

    /// Mark the coarsest cell around `point` that lies inside sphere `id`.
    pub(crate) fn mark(&mut self, point: &[f64], tree: &SphereTree, id: u32) {
        let center = tree.center(id);
        let r = tree.radius(id);
        let r2 = r * r * (1.0 - CONTAIN_TOL);
        for li in 0..self.levels.len() {
            let level = &self.levels[li];
            let h = self.side / level.res as f64;
            let scale = level.res as f64 / self.side;
            // Squared distance from the sphere center to the farthest corner.
            let mut far2 = 0.0;
            for k in 0..self.dim {
                let c = ((point[k] * scale) as u64).min(level.res - 1);
                self.cell[k] = c;
                let lo = c as f64 * h;
                let dk = (center[k] - lo).abs().max((lo + h - center[k]).abs());
                far2 += dk * dk;
            }
            if far2 <= r2 {
                let res = level.res;
                let i = self.cell.iter().fold(0u64, |acc, &c| acc * res + c);
                self.levels[li].bits[(i >> 6) as usize] |= 1 << (i & 63);
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDomain;

    #[test]
    fn marked_cells_lie_inside_the_sphere() {
        let domain = BoxDomain::new(2, 1.0).unwrap();
        let mut tree = SphereTree::new(&domain);
        let id = tree.insert_raw(&[0.5, 0.5], 0.3);
        let mut mask = CoverageMask::new(2, 1.0);
        assert!(!mask.covered(&[0.5, 0.5]));
        mask.mark(&[0.5, 0.5], &tree, id);
        assert!(mask.covered(&[0.5, 0.5]));
        // Every point of a marked cell must be inside the sphere.
        for i in 0..200 {
            for j in 0..200 {
                let p = [i as f64 / 200.0, j as f64 / 200.0];
                if mask.covered(&p) {
                    let d = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
                    assert!(d <= 0.3, "{p:?}");
                }
            }
        }
        // A point near the rim gets a fine cell or none at all.
        mask.mark(&[0.5, 0.79], &tree, id);
        assert!(!mask.covered(&[0.5, 0.81]));
    }
}
