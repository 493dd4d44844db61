use std::sync::Arc;

use rayon::prelude::*;

use super::hmatrix::check_len;
use super::{build_cluster_basis, gather, scatter_add, ClusterBasis, Partition, StorageReport};
use crate::bem::{GalerkinOperator, LayerPotential};
use crate::densela::{matmul, matmul_transposed, DenseMatrix, LinearOperator};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Coupling {
    row: usize,
    col: usize,
    s: DenseMatrix,
}

#[derive(Debug, Clone)]
struct Nearfield {
    row: usize,
    col: usize,
    g: DenseMatrix,
}

/// `G|b ~ V_t S_b V_s^T` on admissible leaves, dense blocks elsewhere.
#[derive(Debug, Clone)]
pub struct H2Matrix {
    partition: Partition,
    row_basis: Arc<ClusterBasis>,
    col_basis: Arc<ClusterBasis>,
    couplings: Vec<Coupling>,
    nearfield: Vec<Nearfield>,
}

impl H2Matrix {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn row_basis(&self) -> &Arc<ClusterBasis> {
        &self.row_basis
    }

    pub fn col_basis(&self) -> &Arc<ClusterBasis> {
        &self.col_basis
    }

    pub fn shares_basis(&self) -> bool {
        Arc::ptr_eq(&self.row_basis, &self.col_basis)
    }

    /// `(t, s, S_b)` for every admissible leaf.
    pub fn couplings(&self) -> impl Iterator<Item = (usize, usize, &DenseMatrix)> {
        self.couplings.iter().map(|c| (c.row, c.col, &c.s))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let (rows, cols) = (&self.partition.rows, &self.partition.cols);
        let mut out = DenseMatrix::zeros(rows.index_count(), cols.index_count());
        let mut put = |t: usize, s: usize, b: &DenseMatrix| {
            for (a, &i) in rows.indices(t).iter().enumerate() {
                for (c, &j) in cols.indices(s).iter().enumerate() {
                    out[(i, j)] = b[(a, c)];
                }
            }
        };
        for c in &self.couplings {
            let vt = self.row_basis.expand(c.row);
            let vs = self.col_basis.expand(c.col);
            put(c.row, c.col, &matmul_transposed(&matmul(&vt, &c.s).expect("ranks agree"), &vs).expect("ranks agree"));
        }
        for n in &self.nearfield {
            put(n.row, n.col, &n.g);
        }
        out
    }

    pub fn storage(&self) -> StorageReport {
        let mut report = StorageReport { rows: self.partition.rows.index_count(), ..Default::default() };
        report.farfield_bytes += self.row_basis.bytes();
        if !self.shares_basis() {
            report.farfield_bytes += self.col_basis.bytes();
        }
        for c in &self.couplings {
            report.farfield_bytes += c.s.bytes();
        }
        for t in 0..self.partition.rows.len() {
            report.add_rank(self.row_basis.rank(t));
        }
        report.nearfield_bytes = self.nearfield.iter().map(|n| n.g.bytes()).sum();
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
        let (from, to) =
            if transposed { (&self.row_basis, &self.col_basis) } else { (&self.col_basis, &self.row_basis) };
        let xhat = from.forward(x);
        let mut yhat: Vec<Vec<f64>> = vec![Vec::new(); to.tree().len()];
        for c in &self.couplings {
            let (src, dst) = if transposed { (c.row, c.col) } else { (c.col, c.row) };
            let acc = &mut yhat[dst];
            if acc.is_empty() {
                *acc = vec![0.0; to.rank(dst)];
            }
            if transposed {
                c.s.gemv_transposed(1.0, &xhat[src], acc);
            } else {
                c.s.gemv(1.0, &xhat[src], acc);
            }
        }
        to.backward(yhat, y);
        let parts: Vec<(usize, Vec<f64>)> = self
            .nearfield
            .par_iter()
            .map(|n| {
                if transposed {
                    (n.col, n.g.matvec_transposed(&gather(x, rows.indices(n.row))))
                } else {
                    (n.row, n.g.matvec(&gather(x, cols.indices(n.col))))
                }
            })
            .collect();
        let target = if transposed { cols } else { rows };
        for (t, v) in parts {
            scatter_add(y, target.indices(t), &v);
        }
    }
}

impl LinearOperator for H2Matrix {
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

/// Green hybrid H²-matrix: nested row and column bases from cross
/// approximation of the Green factors, couplings `S_b = G[P_t, P_s]`.
pub fn build_h2(op: &GalerkinOperator, p: &Partition, m: usize, delta_scale: f64, tol: f64) -> Result<H2Matrix> {
    p.check_operator(op)?;
    if !p.blocks.strict() {
        return Err(Error::ContractViolation("H2 construction needs a strictly admissible block tree".into()));
    }
    let row_basis = Arc::new(build_cluster_basis(op, op.row_side(), p.rows.clone(), m, delta_scale, tol)?);
    let col_basis = match op.layer() {
        LayerPotential::Single if Arc::ptr_eq(&p.rows, &p.cols) => row_basis.clone(),
        _ => Arc::new(build_cluster_basis(op, op.col_side(), p.cols.clone(), m, delta_scale, tol)?),
    };
    let couplings: Vec<Coupling> = p
        .blocks
        .admissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            let s = op.assemble_block(&row_basis.node(blk.row).pivots, &col_basis.node(blk.col).pivots);
            Coupling { row: blk.row, col: blk.col, s }
        })
        .collect();
    let nearfield: Vec<Nearfield> = p
        .blocks
        .inadmissible_leaves()
        .into_par_iter()
        .map(|b| {
            let blk = p.blocks.node(b);
            Nearfield {
                row: blk.row,
                col: blk.col,
                g: op.assemble_block(p.rows.indices(blk.row), p.cols.indices(blk.col)),
            }
        })
        .collect();
    Ok(H2Matrix { partition: p.clone(), row_basis, col_basis, couplings, nearfield })
}
