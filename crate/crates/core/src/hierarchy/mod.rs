//! Hierarchical (H) and H²-matrix approximations of Galerkin matrices:
//! pure Green quadrature, the Green hybrid method, nested cross
//! approximation and a partial-pivot ACA baseline.

mod basis;
mod h2matrix;
mod hmatrix;

pub use basis::{build_cluster_basis, estimate_local_errors, BasisNode, ClusterBasis, LedgerEntry};
pub use h2matrix::{build_h2, H2Matrix};
pub use hmatrix::{
    build_h_aca_baseline, build_h_green, build_h_hybrid, partial_pivot_aca, HMatrix, LeafBlock, Payload,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::bem::{GalerkinOperator, LayerPotential};
use crate::cluster::{build_block_tree, build_cluster_tree, BlockTree, ClusterTree};
use crate::densela::{frobenius_norm, spectral_error, DenseMatrix};
use crate::error::{Error, Result};

/// Largest matrix dimension [`compare_dense`] accepts.
pub const DENSE_COMPARISON_LIMIT: usize = 8192;
/// Power iterations for spectral error estimates.
pub const SPECTRAL_ITERATIONS: usize = 100;

/// Row and column cluster trees with their strictly admissible block tree.
#[derive(Debug, Clone)]
pub struct Partition {
    pub rows: Arc<ClusterTree>,
    pub cols: Arc<ClusterTree>,
    pub blocks: Arc<BlockTree>,
}

impl Partition {
    /// The single layer operator uses one tree for rows and columns.
    pub fn new(op: &GalerkinOperator, leaf_size: usize, eta: f64) -> Result<Self> {
        let rows = Arc::new(build_cluster_tree(op.row_supports(), leaf_size)?);
        let cols = match op.layer() {
            LayerPotential::Single => rows.clone(),
            LayerPotential::Double => Arc::new(build_cluster_tree(op.col_supports(), leaf_size)?),
        };
        let blocks = Arc::new(build_block_tree(&rows, &cols, eta, true)?);
        Ok(Self { rows, cols, blocks })
    }

    pub fn eta(&self) -> f64 {
        self.blocks.eta()
    }

    /// `sum |t| |s|` over admissible leaves.
    pub fn admissible_entries(&self) -> u64 {
        self.blocks
            .admissible_leaves()
            .iter()
            .map(|&b| {
                let blk = self.blocks.node(b);
                (self.rows.node(blk.row).size() * self.cols.node(blk.col).size()) as u64
            })
            .sum()
    }

    pub(crate) fn check_operator(&self, op: &GalerkinOperator) -> Result<()> {
        if self.rows.index_count() != op.row_count() || self.cols.index_count() != op.col_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} partition", op.row_count(), op.col_count()),
                found: format!("{}x{}", self.rows.index_count(), self.cols.index_count()),
            });
        }
        Ok(())
    }
}

/// Memory of a matrix approximation, counting stored floating point values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StorageReport {
    pub rows: usize,
    pub nearfield_bytes: usize,
    /// Low-rank factors, cluster bases and coupling matrices.
    pub farfield_bytes: usize,
    /// Block or cluster rank -> count.
    pub rank_histogram: BTreeMap<usize, usize>,
}

impl StorageReport {
    pub fn total_bytes(&self) -> usize {
        self.nearfield_bytes + self.farfield_bytes
    }

    pub fn bytes_per_dof(&self) -> f64 {
        self.total_bytes() as f64 / self.rows as f64
    }

    pub fn max_rank(&self) -> usize {
        self.rank_histogram.keys().next_back().copied().unwrap_or(0)
    }

    pub(crate) fn add_rank(&mut self, rank: usize) {
        *self.rank_histogram.entry(rank).or_default() += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenseComparison {
    pub rel_frobenius: f64,
    pub rel_spectral: f64,
}

/// Relative Frobenius and spectral errors of `approx` against `reference`.
pub fn compare_dense(approx: &DenseMatrix, reference: &DenseMatrix) -> Result<DenseComparison> {
    let (r, c) = reference.shape();
    if r > DENSE_COMPARISON_LIMIT || c > DENSE_COMPARISON_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "dense comparison of a {r}x{c} matrix exceeds the limit {DENSE_COMPARISON_LIMIT}"
        )));
    }
    let diff = reference.sub(approx)?;
    let fro = frobenius_norm(reference);
    let spec = crate::crossapprox::estimate_norm2(reference, SPECTRAL_ITERATIONS)?;
    let err_spec = spectral_error(reference, approx, SPECTRAL_ITERATIONS)?;
    Ok(DenseComparison { rel_frobenius: relative(frobenius_norm(&diff), fro), rel_spectral: relative(err_spec, spec) })
}

fn relative(err: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        err
    } else {
        err / norm
    }
}

pub(crate) fn gather(x: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| x[i]).collect()
}

pub(crate) fn scatter_add(y: &mut [f64], idx: &[usize], v: &[f64]) {
    for (&i, a) in idx.iter().zip(v) {
        y[i] += a;
    }
}

#[cfg(test)]
mod tests;
