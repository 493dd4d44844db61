//! Binary cluster trees with axis-parallel bounding boxes, block trees and
//! the max-norm admissibility condition.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::vec3::Point3;

/// Axis-parallel box `[min_0, max_0] x [min_1, max_1] x [min_2, max_2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point3,
    pub max: Point3,
}

impl BoundingBox {
    pub fn new(min: Point3, max: Point3) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Self { min: first, max: first };
        for p in it {
            for (k, &c) in p.iter().enumerate() {
                b.min[k] = b.min[k].min(c);
                b.max[k] = b.max[k].max(c);
            }
        }
        Some(b)
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            min: std::array::from_fn(|k| self.min[k].min(other.min[k])),
            max: std::array::from_fn(|k| self.max[k].max(other.max[k])),
        }
    }

    pub fn center(&self) -> Point3 {
        std::array::from_fn(|k| 0.5 * (self.min[k] + self.max[k]))
    }

    pub fn side(&self, k: usize) -> f64 {
        self.max[k] - self.min[k]
    }

    /// Max-norm diameter, the longest side.
    pub fn diam_inf(&self) -> f64 {
        (0..3).map(|k| self.side(k)).fold(0.0, f64::max)
    }

    /// Max-norm distance between two boxes.
    pub fn dist_inf(&self, other: &Self) -> f64 {
        (0..3).map(|k| (other.min[k] - self.max[k]).max(self.min[k] - other.max[k]).max(0.0)).fold(0.0, f64::max)
    }

    pub fn dist_inf_point(&self, p: &Point3) -> f64 {
        (0..3).map(|k| (p[k] - self.max[k]).max(self.min[k] - p[k]).max(0.0)).fold(0.0, f64::max)
    }

    pub fn inflate(&self, delta: f64) -> Self {
        Self { min: std::array::from_fn(|k| self.min[k] - delta), max: std::array::from_fn(|k| self.max[k] + delta) }
    }

    pub fn contains(&self, other: &Self) -> bool {
        (0..3).all(|k| self.min[k] <= other.min[k] && other.max[k] <= self.max[k])
    }

    pub fn longest_axis(&self) -> usize {
        let mut axis = 0;
        for k in 1..3 {
            if self.side(k) > self.side(axis) {
                axis = k;
            }
        }
        axis
    }
}

/// Max-norm admissibility `max(diam B_t, diam B_s) <= eta dist(B_t, B_s)`;
/// touching boxes are never admissible.
pub fn admissible_boxes(bt: &BoundingBox, bs: &BoundingBox, eta: f64) -> bool {
    let dist = bt.dist_inf(bs);
    dist > 0.0 && bt.diam_inf().max(bs.diam_inf()) <= eta * dist
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Positions in the tree permutation.
    pub range: Range<usize>,
    pub bbox: BoundingBox,
    pub sons: Vec<usize>,
    pub parent: Option<usize>,
    pub level: usize,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.range.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.sons.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<Cluster>,
    perm: Vec<usize>,
    supports: Vec<BoundingBox>,
    leaf_size: usize,
}

impl ClusterTree {
    pub const ROOT: usize = 0;

    pub fn node(&self, t: usize) -> &Cluster {
        &self.nodes[t]
    }

    pub fn nodes(&self) -> &[Cluster] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Global indices of cluster `t`.
    pub fn indices(&self, t: usize) -> &[usize] {
        &self.perm[self.nodes[t].range.clone()]
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn supports(&self) -> &[BoundingBox] {
        &self.supports
    }

    pub fn index_count(&self) -> usize {
        self.perm.len()
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&t| self.nodes[t].is_leaf())
    }

    /// Every son appears before its parent.
    pub fn postorder(&self) -> Vec<usize> {
        // nodes are created parent-first, so reverse creation order works
        (0..self.nodes.len()).rev().collect()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|c| c.level).max().unwrap_or(0)
    }
}

/// Recursive bisection at the midpoint of the longest box axis, by support
/// box centers. If all centers fall on one side the indices are halved by
/// cardinality instead.
pub fn build_cluster_tree(supports: Vec<BoundingBox>, leaf_size: usize) -> Result<ClusterTree> {
    if supports.is_empty() {
        return Err(Error::InvalidArgument("cluster tree over an empty index set".into()));
    }
    if leaf_size == 0 {
        return Err(Error::InvalidArgument("leaf size must be positive".into()));
    }
    let mut tree = ClusterTree { nodes: Vec::new(), perm: (0..supports.len()).collect(), supports, leaf_size };
    let mut stack = vec![(0..tree.perm.len(), None::<usize>, 0usize)];
    while let Some((range, parent, level)) = stack.pop() {
        let bbox = tight_box(&tree.supports, &tree.perm[range.clone()]);
        let id = tree.nodes.len();
        tree.nodes.push(Cluster { range: range.clone(), bbox, sons: Vec::new(), parent, level });
        if let Some(p) = parent {
            tree.nodes[p].sons.push(id);
        }
        if range.len() <= leaf_size {
            continue;
        }
        let mid = split(&tree.supports, &mut tree.perm[range.clone()], &bbox) + range.start;
        // pushed in reverse so the first son is created first
        stack.push((mid..range.end, Some(id), level + 1));
        stack.push((range.start..mid, Some(id), level + 1));
    }
    // sons were pushed in creation order, keep them sorted for determinism
    for c in &mut tree.nodes {
        c.sons.sort_unstable();
    }
    Ok(tree)
}

fn tight_box(supports: &[BoundingBox], idx: &[usize]) -> BoundingBox {
    let mut b = supports[idx[0]];
    for &i in &idx[1..] {
        b = b.union(&supports[i]);
    }
    b
}

/// Partition `idx` in place, returning the size of the first part (never 0
/// or `idx.len()`).
fn split(supports: &[BoundingBox], idx: &mut [usize], bbox: &BoundingBox) -> usize {
    let axis = bbox.longest_axis();
    let mid = 0.5 * (bbox.min[axis] + bbox.max[axis]);
    let key = |i: usize| supports[i].center()[axis];
    let (mut lo, mut hi) = (0, idx.len());
    while lo < hi {
        if key(idx[lo]) < mid {
            lo += 1;
        } else {
            hi -= 1;
            idx.swap(lo, hi);
        }
    }
    if lo == 0 || lo == idx.len() {
        idx.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(a.cmp(&b)));
        return idx.len() / 2;
    }
    lo
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub row: usize,
    pub col: usize,
    pub admissible: bool,
    pub sons: Vec<usize>,
}

impl Block {
    pub fn is_leaf(&self) -> bool {
        self.sons.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BlockTree {
    nodes: Vec<Block>,
    eta: f64,
    strict: bool,
}

impl BlockTree {
    pub const ROOT: usize = 0;

    pub fn node(&self, b: usize) -> &Block {
        &self.nodes[b]
    }

    pub fn nodes(&self) -> &[Block] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn strict(&self) -> bool {
        self.strict
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&b| self.nodes[b].is_leaf())
    }

    pub fn admissible_leaves(&self) -> Vec<usize> {
        self.leaves().filter(|&b| self.nodes[b].admissible).collect()
    }

    pub fn inadmissible_leaves(&self) -> Vec<usize> {
        self.leaves().filter(|&b| !self.nodes[b].admissible).collect()
    }
}

pub fn admissible(row: &ClusterTree, t: usize, col: &ClusterTree, s: usize, eta: f64) -> bool {
    admissible_boxes(&row.node(t).bbox, &col.node(s).bbox, eta)
}

/// Minimal (strictly) admissible block tree from the root pair downwards.
pub fn build_block_tree(row: &ClusterTree, col: &ClusterTree, eta: f64, strict: bool) -> Result<BlockTree> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    let mut nodes = Vec::new();
    let mut stack = vec![(ClusterTree::ROOT, ClusterTree::ROOT, None::<usize>)];
    while let Some((t, s, parent)) = stack.pop() {
        let id = nodes.len();
        let adm = admissible(row, t, col, s, eta);
        nodes.push(Block { row: t, col: s, admissible: adm, sons: Vec::new() });
        if let Some(p) = parent {
            let parent_node: &mut Block = &mut nodes[p];
            parent_node.sons.push(id);
        }
        if adm {
            continue;
        }
        let (tl, sl) = (row.node(t).is_leaf(), col.node(s).is_leaf());
        let stop = if strict { tl && sl } else { tl || sl };
        if stop {
            continue;
        }
        let ts: Vec<usize> = if tl { vec![t] } else { row.node(t).sons.clone() };
        let ss: Vec<usize> = if sl { vec![s] } else { col.node(s).sons.clone() };
        for &t2 in ts.iter().rev() {
            for &s2 in ss.iter().rev() {
                stack.push((t2, s2, Some(id)));
            }
        }
    }
    for b in &mut nodes {
        b.sons.sort_unstable();
    }
    Ok(BlockTree { nodes, eta, strict })
}

/// Column indices whose whole support box lies in the farfield
/// `{ y : diam(B_t) <= dist(B_t, y) }` of `t`.
pub fn farfield_indices(tree: &ClusterTree, t: usize, col_supports: &[BoundingBox]) -> Vec<usize> {
    let bt = &tree.node(t).bbox;
    let diam = bt.diam_inf();
    (0..col_supports.len()).filter(|&j| bt.dist_inf(&col_supports[j]) >= diam).collect()
}
