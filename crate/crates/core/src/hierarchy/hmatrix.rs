use std::collections::HashMap;

use rayon::prelude::*;

use super::{gather, scatter_add, Partition, StorageReport};
use crate::bem::GalerkinOperator;
use crate::crossapprox::{aca_full_pivot, build_interpolant};
use crate::densela::{matmul_transposed, DenseMatrix, LinearOperator};
use crate::error::{Error, Result};
use crate::green::{assemble_a_t, assemble_b_ts, build_green_rule};

#[derive(Debug, Clone)]
pub enum Payload {
    Dense(DenseMatrix),
    /// Right factor `R` of `L_t R^T`, the left factor being shared by all
    /// blocks of the row cluster.
    SharedLeft(DenseMatrix),
    /// `left right^T`
    LowRank {
        left: DenseMatrix,
        right: DenseMatrix,
    },
}

#[derive(Debug, Clone)]
pub struct LeafBlock {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub payload: Payload,
}

impl LeafBlock {
    pub fn rank(&self, left: &[Option<DenseMatrix>]) -> Option<usize> {
        match &self.payload {
            Payload::Dense(_) => None,
            Payload::SharedLeft(_) => left[self.row].as_ref().map(DenseMatrix::cols),
            Payload::LowRank { left, .. } => Some(left.cols()),
        }
    }
}

/// Hierarchical matrix with one payload per block-tree leaf.
#[derive(Debug, Clone)]
pub struct HMatrix {
    partition: Partition,
    /// Left factors indexed by row cluster.
    left: Vec<Option<DenseMatrix>>,
    leaves: Vec<LeafBlock>,
    /// Leaf positions grouped by row cluster.
    by_row: Vec<(usize, Vec<usize>)>,
}

impl HMatrix {
    fn new(partition: Partition, left: Vec<Option<DenseMatrix>>, mut leaves: Vec<LeafBlock>) -> Self {
        leaves.sort_by_key(|l| l.block);
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, l) in leaves.iter().enumerate() {
            groups.entry(l.row).or_default().push(k);
        }
        let mut by_row: Vec<(usize, Vec<usize>)> = groups.into_iter().collect();
        by_row.sort_unstable();
        Self { partition, left, leaves, by_row }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn leaves(&self) -> &[LeafBlock] {
        &self.leaves
    }

    pub fn left_factor(&self, t: usize) -> Option<&DenseMatrix> {
        self.left[t].as_ref()
    }

    pub fn block_rank(&self, leaf: &LeafBlock) -> Option<usize> {
        leaf.rank(&self.left)
    }

    /// Represented block of `leaf` in the cluster index order.
    pub fn block_dense(&self, leaf: &LeafBlock) -> DenseMatrix {
        match &leaf.payload {
            Payload::Dense(d) => d.clone(),
            Payload::SharedLeft(r) => {
                matmul_transposed(self.left[leaf.row].as_ref().expect("left factor present"), r).expect("ranks agree")
            }
            Payload::LowRank { left, right } => matmul_transposed(left, right).expect("ranks agree"),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (rows, cols) = (&self.partition.rows, &self.partition.cols);
        let mut out = DenseMatrix::zeros(rows.index_count(), cols.index_count());
        for leaf in &self.leaves {
            let b = self.block_dense(leaf);
            for (a, &i) in rows.indices(leaf.row).iter().enumerate() {
                for (c, &j) in cols.indices(leaf.col).iter().enumerate() {
                    out[(i, j)] = b[(a, c)];
                }
            }
        }
        out
    }

    pub fn storage(&self) -> StorageReport {
        let mut report = StorageReport { rows: self.partition.rows.index_count(), ..Default::default() };
        report.farfield_bytes += self.left.iter().flatten().map(DenseMatrix::bytes).sum::<usize>();
        for leaf in &self.leaves {
            match &leaf.payload {
                Payload::Dense(d) => report.nearfield_bytes += d.bytes(),
                Payload::SharedLeft(r) => {
                    report.farfield_bytes += r.bytes();
                    report.add_rank(r.cols());
                }
                Payload::LowRank { left, right } => {
                    report.farfield_bytes += left.bytes() + right.bytes();
                    report.add_rank(left.cols());
                }
            }
        }
        report
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("input", x.len(), self.ncols())?;
        let mut y = vec![0.0; self.nrows()];
        self.apply_impl(x, &mut y, false);
        Ok(y)
    }

    pub fn matvec_transposed(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("input", x.len(), self.nrows())?;
        let mut y = vec![0.0; self.ncols()];
        self.apply_impl(x, &mut y, true);
        Ok(y)
    }

    fn apply_impl(&self, x: &[f64], y: &mut [f64], transposed: bool) {
        let (rows, cols) = (&self.partition.rows, &self.partition.cols);
        if !transposed {
            // leaves of one row cluster share the left factor: sum R^T x first
            let parts: Vec<(usize, Vec<f64>)> = self
                .by_row
                .par_iter()
                .map(|(t, ks)| {
                    let mut yt = vec![0.0; rows.node(*t).size()];
                    let mut z: Option<Vec<f64>> = None;
                    for &k in ks {
                        let leaf = &self.leaves[k];
                        let xs = gather(x, cols.indices(leaf.col));
                        match &leaf.payload {
                            Payload::Dense(d) => d.gemv(1.0, &xs, &mut yt),
                            Payload::SharedLeft(r) => {
                                let z = z.get_or_insert_with(|| vec![0.0; r.cols()]);
                                r.gemv_transposed(1.0, &xs, z);
                            }
                            Payload::LowRank { left, right } => left.gemv(1.0, &right.matvec_transposed(&xs), &mut yt),
                        }
                    }
                    if let Some(z) = z {
                        self.left[*t].as_ref().expect("left factor present").gemv(1.0, &z, &mut yt);
                    }
                    (*t, yt)
                })
                .collect();
            for (t, yt) in parts {
                scatter_add(y, rows.indices(t), &yt);
            }
        } else {
            let parts: Vec<(usize, Vec<f64>)> = self
                .leaves
                .par_iter()
                .map(|leaf| {
                    let xt = gather(x, rows.indices(leaf.row));
                    let ys = match &leaf.payload {
                        Payload::Dense(d) => d.matvec_transposed(&xt),
                        Payload::SharedLeft(r) => {
                            r.matvec(&self.left[leaf.row].as_ref().expect("left factor present").matvec_transposed(&xt))
                        }
                        Payload::LowRank { left, right } => right.matvec(&left.matvec_transposed(&xt)),
                    };
                    (leaf.col, ys)
                })
                .collect();
            for (s, ys) in parts {
                scatter_add(y, cols.indices(s), &ys);
            }
        }
    }
}

impl LinearOperator for HMatrix {
    fn nrows(&self) -> usize {
        self.partition.rows.index_count()
    }

    fn ncols(&self) -> usize {
        self.partition.cols.index_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!((x.len(), y.len()), (self.ncols(), self.nrows()), "vector lengths");
        y.fill(0.0);
        self.apply_impl(x, y, false);
    }

    fn apply_transposed(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!((x.len(), y.len()), (self.nrows(), self.ncols()), "vector lengths");
        y.fill(0.0);
        self.apply_impl(x, y, true);
    }
}

pub(crate) fn check_len(what: &str, found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{what} of length {expected}"),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn dense_leaves(op: &GalerkinOperator, p: &Partition) -> Vec<LeafBlock> {
    p.blocks
        .inadmissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            let d = op.assemble_block(p.rows.indices(blk.row), p.cols.indices(blk.col));
            LeafBlock { block: b, row: blk.row, col: blk.col, payload: Payload::Dense(d) }
        })
        .collect()
}

fn admissible_row_clusters(p: &Partition) -> Vec<usize> {
    let mut ts: Vec<usize> = p.blocks.admissible_leaves().iter().map(|&b| p.blocks.node(b).row).collect();
    ts.sort_unstable();
    ts.dedup();
    ts
}

/// Admissible blocks `A_t B_ts^T` from Green quadrature of order `m`.
pub fn build_h_green(op: &GalerkinOperator, p: &Partition, m: usize, delta_scale: f64) -> Result<HMatrix> {
    p.check_operator(op)?;
    let mut left = vec![None; p.rows.len()];
    let rules: Vec<_> = admissible_row_clusters(p)
        .into_par_iter()
        .map(|t| {
            let rule = build_green_rule(&p.rows.node(t).bbox, m, delta_scale)?;
            let a = assemble_a_t(op, op.row_side(), p.rows.indices(t), &rule);
            Ok((t, rule, a))
        })
        .collect::<Result<_>>()?;
    let mut rule_of = HashMap::new();
    for (t, rule, a) in rules {
        left[t] = Some(a);
        rule_of.insert(t, rule);
    }
    let mut leaves: Vec<LeafBlock> = p
        .blocks
        .admissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            let rule = &rule_of[&blk.row];
            let dist = p.rows.node(blk.row).bbox.dist_inf(&p.cols.node(blk.col).bbox);
            if !(dist > rule.delta) {
                return Err(Error::ContractViolation(format!(
                    "block ({}, {}) at distance {dist} is not outside the Green box, delta = {}",
                    blk.row, blk.col, rule.delta
                )));
            }
            let r = assemble_b_ts(op, op.col_side(), p.cols.indices(blk.col), rule);
            Ok(LeafBlock { block: b, row: blk.row, col: blk.col, payload: Payload::SharedLeft(r) })
        })
        .collect::<Result<_>>()?;
    leaves.extend(dense_leaves(op, p));
    Ok(HMatrix::new(p.clone(), left, leaves))
}

/// Green hybrid method: cross approximation of `A_t` gives `C_t` and
/// pivots, every admissible block is `C_t (P_t C_t)^-1 P_t G|b`.
pub fn build_h_hybrid(op: &GalerkinOperator, p: &Partition, m: usize, delta_scale: f64, tol: f64) -> Result<HMatrix> {
    p.check_operator(op)?;
    let interps: Vec<_> = admissible_row_clusters(p)
        .into_par_iter()
        .map(|t| {
            let rule = build_green_rule(&p.rows.node(t).bbox, m, delta_scale)?;
            let idx = p.rows.indices(t);
            let a = assemble_a_t(op, op.row_side(), idx, &rule);
            let ca = aca_full_pivot(&a, tol, usize::MAX)?;
            if ca.rank() == 0 {
                return Err(Error::ContractViolation(format!("Green factor of cluster {t} has rank 0")));
            }
            let interp = build_interpolant(&ca)?;
            let pivots: Vec<usize> = interp.pivots.iter().map(|&k| idx[k]).collect();
            Ok((t, ca.c, interp, pivots))
        })
        .collect::<Result<_>>()?;
    let mut left = vec![None; p.rows.len()];
    let mut pivot_of = HashMap::new();
    for (t, c, interp, pivots) in interps {
        left[t] = Some(c);
        pivot_of.insert(t, (interp, pivots));
    }
    let mut leaves: Vec<LeafBlock> = p
        .blocks
        .admissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            let (interp, pivots) = &pivot_of[&blk.row];
            let rows = op.assemble_block(pivots, p.cols.indices(blk.col));
            let bt = interp.solve_pivot_system(&rows)?;
            Ok(LeafBlock { block: b, row: blk.row, col: blk.col, payload: Payload::SharedLeft(bt.transpose()) })
        })
        .collect::<Result<_>>()?;
    leaves.extend(dense_leaves(op, p));
    Ok(HMatrix::new(p.clone(), left, leaves))
}

/// Partial-pivot ACA on matrix entries supplied row- and columnwise.
///
/// Stops once `|u_k| |v_k| <= eps |sum u v^T|_F`. The next pivot row is the
/// largest entry of the last column among unused rows; a vanishing row is
/// skipped, and the approximation is returned as it stands once every row
/// has been used.
pub fn partial_pivot_aca(
    rows: usize,
    cols: usize,
    eps: f64,
    mut row: impl FnMut(usize) -> Vec<f64>,
    mut col: impl FnMut(usize) -> Vec<f64>,
) -> Result<(DenseMatrix, DenseMatrix)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ACA tolerance must be positive, got {eps}")));
    }
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut used = vec![false; rows];
    let mut norm2 = 0.0f64;
    let mut next = Some(0usize);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    while let Some(i) = next {
        if us.len() >= rows.min(cols) {
            break;
        }
        used[i] = true;
        let mut r = row(i);
        for (u, v) in us.iter().zip(&vs) {
            let ui = u[i];
            r.iter_mut().zip(v).for_each(|(a, b)| *a -= ui * b);
        }
        let (j, pivot) =
            r.iter().enumerate().fold((0, 0.0f64), |acc, (j, v)| if v.abs() > acc.1.abs() { (j, *v) } else { acc });
        if pivot == 0.0 {
            next = (0..rows).find(|&k| !used[k]);
            continue;
        }
        let v: Vec<f64> = r.iter().map(|a| a / pivot).collect();
        let mut u = col(j);
        for (uk, vk) in us.iter().zip(&vs) {
            let vj = vk[j];
            u.iter_mut().zip(uk).for_each(|(a, b)| *a -= vj * b);
        }
        let (nu, nv) = (dot(&u, &u), dot(&v, &v));
        let mut cross = 0.0;
        for (uk, vk) in us.iter().zip(&vs) {
            cross += dot(uk, &u) * dot(vk, &v);
        }
        norm2 += nu * nv + 2.0 * cross;
        us.push(u);
        vs.push(v);
        let last = us.last().unwrap();
        if (nu * nv).sqrt() <= eps * norm2.max(0.0).sqrt() {
            break;
        }
        next = (0..rows).filter(|&k| !used[k]).max_by(|&a, &b| last[a].abs().total_cmp(&last[b].abs()).then(b.cmp(&a)));
    }
    let k = us.len();
    Ok((DenseMatrix::from_fn(rows, k, |i, l| us[l][i]), DenseMatrix::from_fn(cols, k, |j, l| vs[l][j])))
}

/// Baseline H-matrix: partial-pivot ACA directly on the Galerkin entries of
/// every admissible block.
pub fn build_h_aca_baseline(op: &GalerkinOperator, p: &Partition, eps: f64) -> Result<HMatrix> {
    p.check_operator(op)?;
    let mut leaves: Vec<LeafBlock> = p
        .blocks
        .admissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            let (ri, ci) = (p.rows.indices(blk.row), p.cols.indices(blk.col));
            let (left, right) = partial_pivot_aca(
                ri.len(),
                ci.len(),
                eps,
                |i| op.assemble_block(&ri[i..=i], ci).as_slice().to_vec(),
                |j| op.assemble_block(ri, &ci[j..=j]).as_slice().to_vec(),
            )?;
            Ok(LeafBlock { block: b, row: blk.row, col: blk.col, payload: Payload::LowRank { left, right } })
        })
        .collect::<Result<_>>()?;
    leaves.extend(dense_leaves(op, p));
    Ok(HMatrix::new(p.clone(), vec![None; p.rows.len()], leaves))
}
