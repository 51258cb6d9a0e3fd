//! Bounding-volume binary tree over the inserted spheres.
//!
//! Every node carries an axis-aligned box that encloses the full extent
//! (`center ± radius`) of every sphere below it. Leaves hold up to
//! `leaf_capacity` spheres; an overfull leaf splits at the median center
//! coordinate along its widest axis and both children are re-fitted tightly,
//! so children may overlap. Spheres only ever live in leaves.
//!
//! The one query answered is "how large can a sphere centered at `x` grow":
//! the minimum of the wall gap and the signed gaps to all stored spheres. The
//! traversal prunes a node when the distance from `x` to its box is strictly
//! larger than the best gap found so far, which returns the same
//! floating-point minimum as a linear scan.

use crate::error::{domain, Result};
use crate::geometry::{raw_signed_gap, raw_wall_gap, BoxDomain, Sphere};

pub const DEFAULT_LEAF_CAPACITY: usize = 128;

/// Relative outward padding applied to every box, so that the computed
/// box distance never exceeds a computed signed gap through rounding.
const BOX_PAD: f64 = 1e-12;

pub type SphereId = u32;

#[derive(Debug, Clone)]
struct Node {
    /// `[lo_0, .., lo_{d-1}, hi_0, .., hi_{d-1}]`
    bbox: Vec<f64>,
    kind: NodeKind,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Leaf {
        ids: Vec<SphereId>,
        /// Packed `[c_0, .., c_{d-1}, r]` per member, same order as `ids`.
        data: Vec<f64>,
    },
    Inner {
        axis: usize,
        split: f64,
        left: usize,
        right: usize,
    },
}

/// Result of a largest-empty-radius query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxRadius {
    pub radius: f64,
    pub nearest: Option<SphereId>,
}

#[derive(Debug, Clone)]
pub struct SphereTree {
    dim: usize,
    side: f64,
    leaf_capacity: usize,
    nodes: Vec<Node>,
    centers: Vec<f64>,
    radii: Vec<f64>,
}

/// Counters collected by [`SphereTree::query_stats`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    pub nodes_visited: usize,
    pub spheres_tested: usize,
}

impl SphereTree {
    pub fn new(domain: &BoxDomain) -> Self {
        Self::with_capacity(domain, DEFAULT_LEAF_CAPACITY)
    }

    pub fn with_capacity(domain: &BoxDomain, leaf_capacity: usize) -> Self {
        let dim = domain.dimension();
        let leaf_capacity = leaf_capacity.max(2);
        SphereTree {
            dim,
            side: domain.side(),
            leaf_capacity,
            nodes: vec![Node {
                bbox: empty_box(dim),
                kind: NodeKind::Leaf {
                    ids: Vec::new(),
                    data: Vec::new(),
                },
            }],
            centers: Vec::new(),
            radii: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn center(&self, id: SphereId) -> &[f64] {
        let i = id as usize * self.dim;
        &self.centers[i..i + self.dim]
    }

    pub fn radius(&self, id: SphereId) -> f64 {
        self.radii[id as usize]
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn centers_flat(&self) -> &[f64] {
        &self.centers
    }

    pub fn sphere(&self, id: SphereId) -> Sphere {
        Sphere {
            center: crate::geometry::PointD::new(self.center(id).to_vec())
                .expect("stored centers are finite"),
            radius: self.radius(id),
        }
    }

    pub fn insert(&mut self, sphere: &Sphere) -> SphereId {
        self.insert_raw(sphere.center.coords(), sphere.radius)
    }

    /// Insert a sphere given as a center slice and radius.
    pub fn insert_raw(&mut self, center: &[f64], radius: f64) -> SphereId {
        assert_eq!(center.len(), self.dim, "sphere dimension mismatch");
        let id = self.radii.len() as SphereId;
        self.centers.extend_from_slice(center);
        self.radii.push(radius);

        let dim = self.dim;
        let mut node = 0;
        loop {
            grow_box(&mut self.nodes[node].bbox, center, radius, dim);
            match &mut self.nodes[node].kind {
                NodeKind::Inner {
                    axis,
                    split,
                    left,
                    right,
                } => {
                    node = if center[*axis] < *split {
                        *left
                    } else {
                        *right
                    };
                }
                NodeKind::Leaf { ids, data } => {
                    ids.push(id);
                    data.extend_from_slice(center);
                    data.push(radius);
                    if ids.len() > self.leaf_capacity {
                        self.split_leaf(node);
                    }
                    return id;
                }
            }
        }
    }

    fn split_leaf(&mut self, node: usize) {
        let dim = self.dim;
        let stride = dim + 1;
        let (ids, data) = match &mut self.nodes[node].kind {
            NodeKind::Leaf { ids, data } => (std::mem::take(ids), std::mem::take(data)),
            NodeKind::Inner { .. } => unreachable!("only leaves split"),
        };
        let bbox = &self.nodes[node].bbox;
        let axis = (0..dim)
            .max_by(|&a, &b| {
                let wa = bbox[dim + a] - bbox[a];
                let wb = bbox[dim + b] - bbox[b];
                wa.total_cmp(&wb)
            })
            .unwrap_or(0);

        let mut order: Vec<usize> = (0..ids.len()).collect();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            data[a * stride + axis]
                .total_cmp(&data[b * stride + axis])
                .then(ids[a].cmp(&ids[b]))
        });
        let split = data[order[mid] * stride + axis];

        let mut left = Node {
            bbox: empty_box(dim),
            kind: NodeKind::Leaf {
                ids: Vec::with_capacity(self.leaf_capacity + 1),
                data: Vec::with_capacity((self.leaf_capacity + 1) * stride),
            },
        };
        let mut right = left.clone();
        for (rank, &k) in order.iter().enumerate() {
            let target = if rank < mid { &mut left } else { &mut right };
            let member = &data[k * stride..(k + 1) * stride];
            grow_box(&mut target.bbox, &member[..dim], member[dim], dim);
            if let NodeKind::Leaf {
                ids: tid,
                data: tdata,
            } = &mut target.kind
            {
                tid.push(ids[k]);
                tdata.extend_from_slice(member);
            }
        }
        // Insertion routes by `center[axis] < split`; make the partition agree
        // with that rule when several centers share the median coordinate.
        rebalance_ties(&mut left, &mut right, axis, split, dim);

        let li = self.nodes.len();
        self.nodes.push(left);
        self.nodes.push(right);
        self.nodes[node].kind = NodeKind::Inner {
            axis,
            split,
            left: li,
            right: li + 1,
        };
    }

    /// Largest radius a sphere centered at `point` can take without crossing
    /// a wall or overlapping a stored sphere. Negative when `point` lies
    /// strictly inside a stored sphere.
    pub fn query_max_radius(&self, point: &[f64], domain: &BoxDomain) -> Result<MaxRadius> {
        if point.len() != self.dim || !domain.contains(point) {
            return Err(domain!("query point {point:?} is outside the box"));
        }
        Ok(self.query_inner(point, &mut QueryStats::default()))
    }

    /// Same as [`query_max_radius`](Self::query_max_radius), also reporting
    /// traversal counters.
    pub fn query_stats(
        &self,
        point: &[f64],
        domain: &BoxDomain,
    ) -> Result<(MaxRadius, QueryStats)> {
        if point.len() != self.dim || !domain.contains(point) {
            return Err(domain!("query point {point:?} is outside the box"));
        }
        let mut stats = QueryStats::default();
        let res = self.query_inner(point, &mut stats);
        Ok((res, stats))
    }

    /// Query for a point already known to be inside the box.
    pub(crate) fn query_unchecked(&self, point: &[f64]) -> MaxRadius {
        self.query_inner(point, &mut QueryStats::default())
    }

    /// Insertion-time query: `None` as soon as `point` is found inside (or on)
    /// a stored sphere, otherwise the exact maximal radius.
    /// `Err` carries the covering sphere, if any (`None` on the box boundary).
    pub(crate) fn query_free(
        &self,
        point: &[f64],
    ) -> std::result::Result<MaxRadius, Option<SphereId>> {
        let res = self.traverse(point, &mut QueryStats::default(), true);
        if res.radius > 0.0 {
            Ok(res)
        } else {
            Err(res.nearest)
        }
    }

    fn query_inner(&self, point: &[f64], stats: &mut QueryStats) -> MaxRadius {
        self.traverse(point, stats, false)
    }

    fn traverse(
        &self,
        point: &[f64],
        stats: &mut QueryStats,
        stop_when_covered: bool,
    ) -> MaxRadius {
        let dim = self.dim;
        let stride = dim + 1;
        let mut best = raw_wall_gap(point, self.side);
        let mut nearest = None;

        let mut stack = Stack::new();
        let root_dist = box_distance(&self.nodes[0].bbox, point, dim);
        stack.push((0, root_dist));

        while let Some((node, dist)) = stack.pop() {
            // Box distance bounds the signed gap from below only for points
            // outside the ball, so boxes containing the point are never pruned.
            if dist > best.max(0.0) {
                continue;
            }
            stats.nodes_visited += 1;
            match &self.nodes[node].kind {
                NodeKind::Leaf { ids, data } => {
                    for (k, member) in data.chunks_exact(stride).enumerate() {
                        let r = member[dim];
                        let reach = best + r;
                        // gap >= -r > best: cannot improve.
                        if reach < 0.0 {
                            continue;
                        }
                        let center = &member[..dim];
                        let d2: f64 = center
                            .iter()
                            .zip(point)
                            .map(|(c, p)| (p - c) * (p - c))
                            .sum();
                        if d2 > reach * reach * (1.0 + 1e-9) {
                            continue;
                        }
                        stats.spheres_tested += 1;
                        let gap = d2.sqrt() - r;
                        if gap < best {
                            best = gap;
                            nearest = Some(ids[k]);
                            if stop_when_covered && best <= 0.0 {
                                return MaxRadius {
                                    radius: best,
                                    nearest,
                                };
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right, .. } => {
                    let dl = box_distance(&self.nodes[*left].bbox, point, dim);
                    let dr = box_distance(&self.nodes[*right].bbox, point, dim);
                    let (near, dn, far, df) = if dl <= dr {
                        (*left, dl, *right, dr)
                    } else {
                        (*right, dr, *left, dl)
                    };
                    let bound = best.max(0.0);
                    if df <= bound {
                        stack.push((far, df));
                    }
                    if dn <= bound {
                        stack.push((near, dn));
                    }
                }
            }
        }
        MaxRadius {
            radius: best,
            nearest,
        }
    }

    /// Linear scan over every stored sphere; the reference the tree must match.
    pub fn brute_force_max_radius(&self, point: &[f64]) -> MaxRadius {
        let mut best = raw_wall_gap(point, self.side);
        let mut nearest = None;
        for (i, (center, &r)) in self
            .centers
            .chunks_exact(self.dim)
            .zip(&self.radii)
            .enumerate()
        {
            let gap = raw_signed_gap(point, center, r);
            if gap < best {
                best = gap;
                nearest = Some(i as SphereId);
            }
        }
        MaxRadius {
            radius: best,
            nearest,
        }
    }

    /// Walk the tree and return, for every node, its box, its own sphere ids
    /// and its children. Used for structural audits.
    pub fn nodes(&self) -> Vec<NodeView<'_>> {
        self.nodes
            .iter()
            .map(|n| match &n.kind {
                NodeKind::Leaf { ids, .. } => NodeView {
                    lo: &n.bbox[..self.dim],
                    hi: &n.bbox[self.dim..],
                    sphere_ids: ids,
                    children: None,
                },
                NodeKind::Inner { left, right, .. } => NodeView {
                    lo: &n.bbox[..self.dim],
                    hi: &n.bbox[self.dim..],
                    sphere_ids: &[],
                    children: Some((*left, *right)),
                },
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => 1,
                NodeKind::Inner { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Read-only view of one tree node.
#[derive(Debug, Clone, Copy)]
pub struct NodeView<'a> {
    pub lo: &'a [f64],
    pub hi: &'a [f64],
    pub sphere_ids: &'a [SphereId],
    pub children: Option<(usize, usize)>,
}

/// Traversal stack that stays on the call stack for realistic tree depths.
struct Stack {
    inline: [(usize, f64); 96],
    len: usize,
    spill: Vec<(usize, f64)>,
}

impl Stack {
    fn new() -> Self {
        Stack {
            inline: [(0, 0.0); 96],
            len: 0,
            spill: Vec::new(),
        }
    }

    #[inline]
    fn push(&mut self, item: (usize, f64)) {
        if self.len < self.inline.len() {
            self.inline[self.len] = item;
            self.len += 1;
        } else {
            self.spill.push(item);
        }
    }

    #[inline]
    fn pop(&mut self) -> Option<(usize, f64)> {
        if let Some(item) = self.spill.pop() {
            return Some(item);
        }
        if self.len == 0 {
            return None;
        }
        self.len -= 1;
        Some(self.inline[self.len])
    }
}

fn empty_box(dim: usize) -> Vec<f64> {
    let mut b = vec![f64::INFINITY; 2 * dim];
    b[dim..].fill(f64::NEG_INFINITY);
    b
}

#[inline]
fn grow_box(bbox: &mut [f64], center: &[f64], radius: f64, dim: usize) {
    for (i, &c) in center.iter().enumerate() {
        let pad = BOX_PAD * (c.abs() + radius);
        let lo = c - radius - pad;
        let hi = c + radius + pad;
        if lo < bbox[i] {
            bbox[i] = lo;
        }
        if hi > bbox[dim + i] {
            bbox[dim + i] = hi;
        }
    }
}

#[inline]
fn box_distance(bbox: &[f64], point: &[f64], dim: usize) -> f64 {
    let mut d2 = 0.0;
    for (i, &p) in point.iter().enumerate() {
        let lo = bbox[i];
        let hi = bbox[dim + i];
        let e = if p < lo {
            lo - p
        } else if p > hi {
            p - hi
        } else {
            0.0
        };
        d2 += e * e;
    }
    if d2 == 0.0 {
        0.0
    } else if d2.is_finite() {
        d2.sqrt()
    } else {
        f64::INFINITY
    }
}

/// Move members whose split coordinate contradicts the routing rule
/// (`< split` goes left) to the other side and re-fit both boxes.
fn rebalance_ties(left: &mut Node, right: &mut Node, axis: usize, split: f64, dim: usize) {
    let stride = dim + 1;
    let take = |node: &mut Node, keep: &dyn Fn(f64) -> bool| -> (Vec<SphereId>, Vec<f64>) {
        let mut moved_ids = Vec::new();
        let mut moved_data = Vec::new();
        if let NodeKind::Leaf { ids, data } = &mut node.kind {
            let mut kept_ids = Vec::with_capacity(ids.len());
            let mut kept_data = Vec::with_capacity(data.len());
            for (k, member) in data.chunks_exact(stride).enumerate() {
                if keep(member[axis]) {
                    kept_ids.push(ids[k]);
                    kept_data.extend_from_slice(member);
                } else {
                    moved_ids.push(ids[k]);
                    moved_data.extend_from_slice(member);
                }
            }
            *ids = kept_ids;
            *data = kept_data;
        }
        (moved_ids, moved_data)
    };
    let (to_right_ids, to_right_data) = take(left, &|x| x < split);
    if to_right_ids.is_empty() {
        return;
    }
    if let NodeKind::Leaf { ids, data } = &mut right.kind {
        ids.extend(to_right_ids);
        data.extend(to_right_data);
    }
    for node in [left, right] {
        let mut bbox = empty_box(dim);
        if let NodeKind::Leaf { data, .. } = &node.kind {
            for member in data.chunks_exact(stride) {
                grow_box(&mut bbox, &member[..dim], member[dim], dim);
            }
        }
        node.bbox = bbox;
    }
}
