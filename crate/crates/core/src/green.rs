//! Quadrature applied to Green's representation formula on the boundary
//! of an inflated cluster box, giving kernel factorizations `A_t B_ts^T`.

use rayon::prelude::*;

use crate::bem::{check_positive, GalerkinOperator, Side, SideOperator};
use crate::cluster::{BoundingBox, ClusterTree};
use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use crate::kernel;
use crate::quadrature::{gauss_legendre, tensor_face_rule};
use crate::vec3::Point3;

/// Tensor Gauss rule on the six faces of `omega = B_t` inflated by `delta`.
#[derive(Debug, Clone)]
pub struct GreenRule {
    pub delta: f64,
    pub omega: BoundingBox,
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Outward unit normal of the face carrying each point.
    pub normals: Vec<Point3>,
}

impl GreenRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Columns of `A_t` and `B_ts`.
    pub fn rank(&self) -> usize {
        2 * self.len()
    }
}

/// `delta = delta_scale * diam(B_t)`; faces ordered `-e_1, +e_1, -e_2, ...`
/// with `m x m` points each.
pub fn build_green_rule(bbox: &BoundingBox, m: usize, delta_scale: f64) -> Result<GreenRule> {
    check_positive("delta scale", delta_scale)?;
    let diam = bbox.diam_inf();
    if !(diam > 0.0) {
        return Err(Error::InvalidArgument(format!("Green rule for a degenerate box {bbox:?}")));
    }
    let delta = delta_scale * diam;
    let omega = bbox.inflate(delta);
    let face = tensor_face_rule(&gauss_legendre(m)?);
    let center = omega.center();
    let half: [f64; 3] = std::array::from_fn(|k| 0.5 * omega.side(k));

    let count = 6 * face.points.len();
    let mut points = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(count);
    for axis in 0..3 {
        let (k1, k2) = ((axis + 1) % 3, (axis + 2) % 3);
        let (k1, k2) = (k1.min(k2), k1.max(k2));
        for sign in [-1.0, 1.0] {
            let mut normal = [0.0; 3];
            normal[axis] = sign;
            for (p, w) in face.points.iter().zip(&face.weights) {
                let mut z = [0.0; 3];
                z[axis] = if sign < 0.0 { omega.min[axis] } else { omega.max[axis] };
                z[k1] = center[k1] + half[k1] * p[0];
                z[k2] = center[k2] + half[k2] * p[1];
                points.push(z);
                weights.push(w * half[k1] * half[k2]);
                normals.push(normal);
            }
        }
    }
    Ok(GreenRule { delta, omega, points, weights, normals })
}

/// `Ig[i, nu] = int b_i D g(., z_nu)` and
/// `Idn[i, nu] = int b_i D dg/dn_nu(., z_nu)` for the basis functions
/// `indices` of `side`, `D` being the side's operator.
pub fn side_integrals(
    op: &GalerkinOperator,
    side: Side<'_>,
    indices: &[usize],
    rule: &GreenRule,
) -> (DenseMatrix, DenseMatrix) {
    let k = rule.len();
    let mesh = op.mesh();
    let quad = op.regular_quadrature();
    let mut ig = vec![0.0; indices.len() * k];
    let mut idn = vec![0.0; indices.len() * k];
    ig.par_chunks_mut(k.max(1)).zip(idn.par_chunks_mut(k.max(1))).zip(indices.par_iter()).for_each(|((gi, di), &i)| {
        quad.for_each_point(mesh, side.space, i, |x, n, w| {
            for nu in 0..k {
                let (z, nz) = (&rule.points[nu], &rule.normals[nu]);
                let (g, dn) = match side.operator {
                    SideOperator::Identity => (kernel::g(x, z), kernel::dg_dn_y(x, z, nz)),
                    SideOperator::NormalDerivative => (kernel::dg_dn_x(x, z, n), kernel::d2g_dn_x_dn_y(x, z, n, nz)),
                };
                gi[nu] += w * g;
                di[nu] += w * dn;
            }
        });
    });
    (
        DenseMatrix::from_vec(indices.len(), k, ig).expect("sizes match"),
        DenseMatrix::from_vec(indices.len(), k, idn).expect("sizes match"),
    )
}

/// `A_t = [ sqrt(w) Ig | delta sqrt(w) Idn ]`
pub fn assemble_a_t(op: &GalerkinOperator, side: Side<'_>, indices: &[usize], rule: &GreenRule) -> DenseMatrix {
    let (ig, idn) = side_integrals(op, side, indices, rule);
    combine(&ig, &idn, rule, |sw| (sw, rule.delta * sw))
}

/// `B_ts = [ sqrt(w) Idn | -sqrt(w)/delta Ig ]`, so that the block is
/// approximated by `A_t B_ts^T`.
pub fn assemble_b_ts(op: &GalerkinOperator, side: Side<'_>, indices: &[usize], rule: &GreenRule) -> DenseMatrix {
    let (ig, idn) = side_integrals(op, side, indices, rule);
    combine(&idn, &ig, rule, |sw| (sw, -sw / rule.delta))
}

fn combine(
    left: &DenseMatrix,
    right: &DenseMatrix,
    rule: &GreenRule,
    factors: impl Fn(f64) -> (f64, f64),
) -> DenseMatrix {
    let k = rule.len();
    let scales: Vec<(f64, f64)> = rule.weights.iter().map(|w| factors(w.sqrt())).collect();
    DenseMatrix::from_fn(left.rows(), 2 * k, |i, c| {
        if c < k {
            scales[c].0 * left[(i, c)]
        } else {
            scales[c - k].1 * right[(i, c - k)]
        }
    })
}

/// `G[t, s] ~ a b^T`
#[derive(Debug, Clone)]
pub struct GreenFactor {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
}

impl GreenFactor {
    pub fn to_dense(&self) -> DenseMatrix {
        crate::densela::matmul_transposed(&self.a, &self.b).expect("factor ranks agree")
    }
}

/// Green factorization of the block `(t, s)`; `B_s` must lie outside
/// `omega_t`.
pub fn green_block(
    op: &GalerkinOperator,
    rows: &ClusterTree,
    t: usize,
    cols: &ClusterTree,
    s: usize,
    m: usize,
    delta_scale: f64,
) -> Result<GreenFactor> {
    let (bt, bs) = (&rows.node(t).bbox, &cols.node(s).bbox);
    let rule = build_green_rule(bt, m, delta_scale)?;
    let dist = bt.dist_inf(bs);
    if !(dist > rule.delta) {
        return Err(Error::ContractViolation(format!(
            "block ({t}, {s}) at distance {dist} is not outside the Green box, delta = {}",
            rule.delta
        )));
    }
    let a = assemble_a_t(op, op.row_side(), rows.indices(t), &rule);
    let b = assemble_b_ts(op, op.col_side(), cols.indices(s), &rule);
    Ok(GreenFactor { a, b })
}

#[cfg(test)]
mod tests;
