use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bem::{GalerkinOperator, Side};
use crate::cluster::{farfield_indices, BoundingBox, ClusterTree};
use crate::crossapprox::{aca_full_pivot, build_interpolant, estimate_norm2};
use crate::densela::{matmul, DenseMatrix};
use crate::error::{Error, Result};
use crate::green::{assemble_a_t, build_green_rule};

const NORM_ITERATIONS: usize = 100;

/// Interpolation data of one cluster.
#[derive(Debug, Clone)]
pub struct BasisNode {
    /// Global indices selected by `P_t`.
    pub pivots: Vec<usize>,
    /// `P_t C_t` of the last cross approximation, unit lower triangular.
    pub pc: DenseMatrix,
    /// `V_t`, stored for leaves only.
    pub leaf: Option<DenseMatrix>,
    /// `E_t'` for every son `t'`, `rank(t') x rank(t)`.
    pub transfer: Vec<DenseMatrix>,
    /// `||V_t||_2` at leaves, `||V^_t||_2` otherwise.
    pub vhat_norm: f64,
    /// Upper bound for `||V_t||_2` by the product recursion.
    pub norm_bound: f64,
    /// `Lambda^_t`: 1 at leaves, the largest son bound otherwise.
    pub stability: f64,
}

impl BasisNode {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    fn bytes(&self) -> usize {
        self.leaf.as_ref().map_or(0, DenseMatrix::bytes) + self.transfer.iter().map(DenseMatrix::bytes).sum::<usize>()
    }
}

/// Nested cluster basis `V_t P_t` built bottom-up by cross approximation
/// of the Green factors.
#[derive(Debug, Clone)]
pub struct ClusterBasis {
    tree: Arc<ClusterTree>,
    nodes: Vec<BasisNode>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub cluster: usize,
    pub level: usize,
    pub rank: usize,
    pub vhat_norm: f64,
    pub norm_bound: f64,
    pub stability: f64,
}

impl ClusterBasis {
    pub fn tree(&self) -> &Arc<ClusterTree> {
        &self.tree
    }

    pub fn node(&self, t: usize) -> &BasisNode {
        &self.nodes[t]
    }

    pub fn rank(&self, t: usize) -> usize {
        self.nodes[t].rank()
    }

    /// Leaf matrices and transfer matrices.
    pub fn bytes(&self) -> usize {
        self.nodes.iter().map(BasisNode::bytes).sum()
    }

    /// `V_t` expanded through the transfer matrices.
    pub fn expand(&self, t: usize) -> DenseMatrix {
        let node = &self.nodes[t];
        if let Some(v) = &node.leaf {
            return v.clone();
        }
        let sons = &self.tree.node(t).sons;
        let mut parts = sons.iter().zip(&node.transfer).map(|(&s, e)| matmul(&self.expand(s), e).expect("ranks agree"));
        let first = parts.next().expect("non-leaf has sons");
        parts.fold(first, |acc, p| acc.vstack(&p).expect("ranks agree"))
    }

    pub fn ledger(&self) -> Vec<LedgerEntry> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(t, n)| LedgerEntry {
                cluster: t,
                level: self.tree.node(t).level,
                rank: n.rank(),
                vhat_norm: n.vhat_norm,
                norm_bound: n.norm_bound,
                stability: n.stability,
            })
            .collect()
    }

    /// `x^_t = V_t^T x|t` for every cluster.
    pub(crate) fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = vec![Vec::new(); self.nodes.len()];
        for t in self.tree.postorder() {
            let node = &self.nodes[t];
            out[t] = match &node.leaf {
                Some(v) => v.matvec_transposed(&super::gather(x, self.tree.indices(t))),
                None => {
                    let mut acc = vec![0.0; node.rank()];
                    for (&s, e) in self.tree.node(t).sons.iter().zip(&node.transfer) {
                        e.gemv_transposed(1.0, &out[s], &mut acc);
                    }
                    acc
                }
            };
        }
        out
    }

    /// `y += sum_t V_t y^_t`, consuming the coefficients.
    pub(crate) fn backward(&self, mut coeffs: Vec<Vec<f64>>, y: &mut [f64]) {
        for t in 0..self.nodes.len() {
            // parents precede sons in creation order
            let node = &self.nodes[t];
            let yt = std::mem::take(&mut coeffs[t]);
            if yt.is_empty() {
                continue;
            }
            match &node.leaf {
                Some(v) => super::scatter_add(y, self.tree.indices(t), &v.matvec(&yt)),
                None => {
                    for (&s, e) in self.tree.node(t).sons.iter().zip(&node.transfer) {
                        if coeffs[s].is_empty() {
                            coeffs[s] = vec![0.0; e.rows()];
                        }
                        e.gemv(1.0, &yt, &mut coeffs[s]);
                    }
                }
            }
        }
    }
}

/// Builds `V_t`, `E_t'` and `P_t` for every cluster of `tree`.
///
/// Leaves approximate the full Green factor `A_t`; a cluster with sons
/// approximates the rows of its own `A_t` at the sons' pivots. `tol` is the
/// relative stopping threshold of the cross approximation.
pub fn build_cluster_basis(
    op: &GalerkinOperator,
    side: Side<'_>,
    tree: Arc<ClusterTree>,
    m: usize,
    delta_scale: f64,
    tol: f64,
) -> Result<ClusterBasis> {
    if tree.index_count() != side.space.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("cluster tree over {} basis functions", side.space.len()),
            found: tree.index_count().to_string(),
        });
    }
    let depth = tree.depth();
    let mut levels = vec![Vec::new(); depth + 1];
    for (t, c) in tree.nodes().iter().enumerate() {
        if !c.is_leaf() && c.sons.len() != 2 {
            return Err(Error::ContractViolation(format!("cluster {t} has {} sons, expected 2", c.sons.len())));
        }
        levels[c.level].push(t);
    }
    let mut nodes: Vec<Option<BasisNode>> = vec![None; tree.len()];
    for level in levels.iter().rev() {
        let built: Vec<(usize, BasisNode)> = level
            .par_iter()
            .map(|&t| build_node(op, side, &tree, &nodes, t, m, delta_scale, tol).map(|n| (t, n)))
            .collect::<Result<_>>()?;
        for (t, n) in built {
            nodes[t] = Some(n);
        }
    }
    Ok(ClusterBasis { tree, nodes: nodes.into_iter().map(|n| n.expect("every level built")).collect() })
}

#[allow(clippy::too_many_arguments)]
fn build_node(
    op: &GalerkinOperator,
    side: Side<'_>,
    tree: &ClusterTree,
    done: &[Option<BasisNode>],
    t: usize,
    m: usize,
    delta_scale: f64,
    tol: f64,
) -> Result<BasisNode> {
    let cluster = tree.node(t);
    let rule = build_green_rule(&cluster.bbox, m, delta_scale)?;
    let sons: Vec<&BasisNode> = cluster.sons.iter().map(|&s| done[s].as_ref().expect("sons built first")).collect();
    let rows: Vec<usize> = if sons.is_empty() {
        tree.indices(t).to_vec()
    } else {
        sons.iter().flat_map(|s| s.pivots.iter().copied()).collect()
    };
    let a = assemble_a_t(op, side, &rows, &rule);
    let ca = aca_full_pivot(&a, tol, usize::MAX)?;
    if ca.rank() == 0 {
        return Err(Error::ContractViolation(format!("Green factor of cluster {t} has rank 0")));
    }
    let interp = build_interpolant(&ca)?;
    let pivots: Vec<usize> = interp.pivots.iter().map(|&p| rows[p]).collect();
    let vhat_norm = estimate_norm2(&interp.v, NORM_ITERATIONS)?;
    if sons.is_empty() {
        return Ok(BasisNode {
            pivots,
            pc: interp.pc,
            leaf: Some(interp.v),
            transfer: Vec::new(),
            vhat_norm,
            norm_bound: vhat_norm,
            stability: 1.0,
        });
    }
    let mut transfer = Vec::with_capacity(sons.len());
    let mut start = 0;
    for s in &sons {
        transfer.push(interp.v.row_range(start, start + s.rank()));
        start += s.rank();
    }
    let stability = sons.iter().map(|s| s.norm_bound).fold(0.0, f64::max);
    Ok(BasisNode {
        pivots,
        pc: interp.pc,
        leaf: None,
        transfer,
        vhat_norm,
        norm_bound: stability * vhat_norm,
        stability,
    })
}

/// Sampled stand-in for the local errors `eps^_t`: the farfield is
/// replaced by at most `samples` random farfield indices. Leaves measure
/// `G|t x F - I_t G|t x F`, clusters with sons the same for the stacked
/// sons' pivot rows. `block(rows, far)` returns the kernel matrix oriented
/// with the cluster's indices as rows. Clusters without farfield report 0.
pub fn estimate_local_errors(
    basis: &ClusterBasis,
    other_supports: &[BoundingBox],
    samples: usize,
    seed: u64,
    block: impl Fn(&[usize], &[usize]) -> DenseMatrix + Sync,
) -> Result<Vec<f64>> {
    let tree = basis.tree();
    (0..tree.len())
        .into_par_iter()
        .map(|t| {
            let far = farfield_indices(tree, t, other_supports);
            if far.is_empty() {
                return Ok(0.0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ t as u64);
            let far: Vec<usize> = if far.len() > samples {
                let mut pick: Vec<usize> = sample(&mut rng, far.len(), samples).into_iter().map(|k| far[k]).collect();
                pick.sort_unstable();
                pick
            } else {
                far
            };
            let node = basis.node(t);
            let (rows, v): (Vec<usize>, DenseMatrix) = match &node.leaf {
                Some(v) => (tree.indices(t).to_vec(), v.clone()),
                None => {
                    let rows: Vec<usize> =
                        tree.node(t).sons.iter().flat_map(|&s| basis.node(s).pivots.iter().copied()).collect();
                    let mut stacked = node.transfer[0].clone();
                    for e in &node.transfer[1..] {
                        stacked = stacked.vstack(e)?;
                    }
                    (rows, stacked)
                }
            };
            let g = block(&rows, &far);
            let pos: Vec<usize> =
                node.pivots.iter().map(|p| rows.iter().position(|r| r == p).expect("pivot among rows")).collect();
            let approx = matmul(&v, &g.select_rows(&pos))?;
            crate::densela::spectral_error(&g, &approx, NORM_ITERATIONS)
        })
        .collect()
}
