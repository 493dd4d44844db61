//! Galerkin discretization of the Laplace single and double layer
//! potentials with piecewise constant and continuous piecewise linear
//! basis functions.

mod dirichlet;

pub use dirichlet::{
    gram_apply, l2_projection, mass_apply, mass_entry, neumann_l2_error, solve_dirichlet, DirichletSolution,
    HarmonicTestCase,
};

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::cluster::BoundingBox;
use crate::densela::DenseMatrix;
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::kernel;
use crate::quadrature::{sauter_rule, triangle_tensor_rule, PairCase, TrianglePairRule};
use crate::vec3::{affine, sub, Point3};

pub const DEFAULT_REGULAR_ORDER: usize = 3;
pub const DEFAULT_SINGULAR_ORDER: usize = 5;

/// Piecewise constants live on triangles, piecewise linears on vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Constant,
    Linear,
}

/// What is applied to the kernel in the argument belonging to one side of
/// the bilinear form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideOperator {
    Identity,
    /// Derivative along the triangle normal at the integration point.
    NormalDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerPotential {
    /// `g(x, y)`, constant x constant.
    Single,
    /// `dg/dn(y)(x, y)`, constant x linear.
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuadratureOrders {
    /// Gauss points per direction for separated triangle pairs and for
    /// single-surface integrals.
    pub regular: usize,
    /// Gauss points per direction for touching triangle pairs.
    pub singular: usize,
}

impl Default for QuadratureOrders {
    fn default() -> Self {
        Self { regular: DEFAULT_REGULAR_ORDER, singular: DEFAULT_SINGULAR_ORDER }
    }
}

/// A triangle carrying part of a basis function; `local` is the corner of
/// the hat function, `None` for a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Piece {
    pub triangle: usize,
    pub local: Option<usize>,
}

/// Basis functions as lists of triangle pieces.
#[derive(Debug, Clone)]
pub struct BasisSpace {
    kind: BasisKind,
    pieces: Vec<Vec<Piece>>,
}

impl BasisSpace {
    pub fn new(mesh: &TriangleMesh, kind: BasisKind) -> Self {
        let pieces = match kind {
            BasisKind::Constant => {
                (0..mesh.triangle_count()).map(|t| vec![Piece { triangle: t, local: None }]).collect()
            }
            BasisKind::Linear => mesh
                .vertex_triangles()
                .into_iter()
                .map(|list| list.into_iter().map(|(t, k)| Piece { triangle: t, local: Some(k) }).collect())
                .collect(),
        };
        Self { kind, pieces }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self, i: usize) -> &[Piece] {
        &self.pieces[i]
    }

    /// Support boxes: the triangle box for constants, the union over
    /// incident triangles for hats.
    pub fn supports(&self, mesh: &TriangleMesh) -> Vec<BoundingBox> {
        self.pieces
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|p| {
                        let (lo, hi) = mesh.triangle_bounds(p.triangle);
                        BoundingBox::new(lo, hi)
                    })
                    .reduce(|a, b| a.union(&b))
                    .expect("basis function without support")
            })
            .collect()
    }
}

pub fn basis_supports(mesh: &TriangleMesh, kind: BasisKind) -> Vec<BoundingBox> {
    BasisSpace::new(mesh, kind).supports(mesh)
}

/// A triangle rule mapped to every triangle of a mesh.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    order: usize,
    per_triangle: usize,
    points: Vec<Point3>,
    weights: Vec<f64>,
    /// Barycentric coordinates of the reference points, shared by all
    /// triangles.
    bary: Vec<[f64; 3]>,
}

impl SurfaceQuadrature {
    pub fn new(mesh: &TriangleMesh, order: usize) -> Result<Self> {
        let rule = triangle_tensor_rule(order)?;
        let per = rule.len();
        let mut points = Vec::with_capacity(per * mesh.triangle_count());
        let mut weights = Vec::with_capacity(per * mesh.triangle_count());
        for t in 0..mesh.triangle_count() {
            let [p0, p1, p2] = mesh.corners(t);
            let (e1, e2) = (sub(&p1, &p0), sub(&p2, &p0));
            let jac = 2.0 * mesh.area(t);
            for (uv, w) in rule.points.iter().zip(&rule.weights) {
                points.push(affine(&p0, &e1, &e2, uv[0], uv[1]));
                weights.push(w * jac);
            }
        }
        let bary = rule.points.iter().map(|p| [1.0 - p[0] - p[1], p[0], p[1]]).collect();
        Ok(Self { order, per_triangle: per, points, weights, bary })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self, t: usize) -> &[Point3] {
        &self.points[t * self.per_triangle..(t + 1) * self.per_triangle]
    }

    pub fn weights(&self, t: usize) -> &[f64] {
        &self.weights[t * self.per_triangle..(t + 1) * self.per_triangle]
    }

    pub fn barycentric(&self) -> &[[f64; 3]] {
        &self.bary
    }

    /// Calls `f(x, normal, weight)` at every quadrature point of basis
    /// function `i`, the weight including the basis function value.
    pub fn for_each_point(
        &self,
        mesh: &TriangleMesh,
        space: &BasisSpace,
        i: usize,
        mut f: impl FnMut(&Point3, &Point3, f64),
    ) {
        for piece in space.pieces(i) {
            let n = mesh.normal(piece.triangle);
            let pts = self.points(piece.triangle);
            let ws = self.weights(piece.triangle);
            for q in 0..self.per_triangle {
                let w = match piece.local {
                    None => ws[q],
                    Some(k) => ws[q] * self.bary[q][k],
                };
                f(&pts[q], &n, w);
            }
        }
    }

    /// `int b_i(x) f(x) dx`
    pub fn integrate(
        &self,
        mesh: &TriangleMesh,
        space: &BasisSpace,
        i: usize,
        mut f: impl FnMut(&Point3, &Point3) -> f64,
    ) -> f64 {
        let mut acc = 0.0;
        self.for_each_point(mesh, space, i, |x, n, w| acc += w * f(x, n));
        acc
    }
}

/// One side of the bilinear form: its basis and the operator applied to
/// the kernel in that side's argument.
#[derive(Debug, Clone, Copy)]
pub struct Side<'a> {
    pub space: &'a BasisSpace,
    pub operator: SideOperator,
}

/// Galerkin matrix of a layer potential, evaluated entry by entry or block
/// by block.
///
/// The operator counts every matrix entry it evaluates.
#[derive(Debug)]
pub struct GalerkinOperator {
    mesh: Arc<TriangleMesh>,
    layer: LayerPotential,
    orders: QuadratureOrders,
    rows: BasisSpace,
    cols: BasisSpace,
    regular: SurfaceQuadrature,
    vertex_rule: TrianglePairRule,
    edge_rule: TrianglePairRule,
    identical_rule: TrianglePairRule,
    evaluations: AtomicU64,
}

impl GalerkinOperator {
    pub fn new(mesh: Arc<TriangleMesh>, layer: LayerPotential, orders: QuadratureOrders) -> Result<Self> {
        let rows = BasisSpace::new(&mesh, BasisKind::Constant);
        let cols = match layer {
            LayerPotential::Single => rows.clone(),
            LayerPotential::Double => BasisSpace::new(&mesh, BasisKind::Linear),
        };
        let regular = SurfaceQuadrature::new(&mesh, orders.regular)?;
        Ok(Self {
            layer,
            orders,
            rows,
            cols,
            regular,
            vertex_rule: sauter_rule(PairCase::CommonVertex, orders.singular)?,
            edge_rule: sauter_rule(PairCase::CommonEdge, orders.singular)?,
            identical_rule: sauter_rule(PairCase::Identical, orders.singular)?,
            evaluations: AtomicU64::new(0),
            mesh,
        })
    }

    pub fn single_layer(mesh: Arc<TriangleMesh>) -> Result<Self> {
        Self::new(mesh, LayerPotential::Single, QuadratureOrders::default())
    }

    pub fn double_layer(mesh: Arc<TriangleMesh>) -> Result<Self> {
        Self::new(mesh, LayerPotential::Double, QuadratureOrders::default())
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TriangleMesh> {
        &self.mesh
    }

    pub fn layer(&self) -> LayerPotential {
        self.layer
    }

    pub fn orders(&self) -> QuadratureOrders {
        self.orders
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols.len()
    }

    pub fn row_space(&self) -> &BasisSpace {
        &self.rows
    }

    pub fn col_space(&self) -> &BasisSpace {
        &self.cols
    }

    pub fn regular_quadrature(&self) -> &SurfaceQuadrature {
        &self.regular
    }

    pub fn row_side(&self) -> Side<'_> {
        Side { space: &self.rows, operator: SideOperator::Identity }
    }

    pub fn col_side(&self) -> Side<'_> {
        let operator = match self.layer {
            LayerPotential::Single => SideOperator::Identity,
            LayerPotential::Double => SideOperator::NormalDerivative,
        };
        Side { space: &self.cols, operator }
    }

    pub fn row_supports(&self) -> Vec<BoundingBox> {
        self.rows.supports(&self.mesh)
    }

    pub fn col_supports(&self) -> Vec<BoundingBox> {
        self.cols.supports(&self.mesh)
    }

    /// Number of matrix entries evaluated so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.assemble_block(&[i], &[j])[(0, 0)]
    }

    /// `G[rows, cols]` in the given index order.
    pub fn assemble_block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix {
        self.evaluations.fetch_add((rows.len() * cols.len()) as u64, Ordering::Relaxed);
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        match self.layer {
            LayerPotential::Single => {
                for (a, &i) in rows.iter().enumerate() {
                    for (b, &j) in cols.iter().enumerate() {
                        out[(a, b)] = self.triangle_pair(i, j)[0];
                    }
                }
            }
            LayerPotential::Double => {
                // each triangle pair feeds up to three hat functions
                let mut col_of: HashMap<usize, usize> = HashMap::with_capacity(cols.len());
                for (b, &j) in cols.iter().enumerate() {
                    col_of.insert(j, b);
                }
                let mut sigmas: Vec<usize> =
                    cols.iter().flat_map(|&j| self.cols.pieces(j).iter().map(|p| p.triangle)).collect();
                sigmas.sort_unstable();
                sigmas.dedup();
                let tris = self.mesh.triangles();
                for (a, &i) in rows.iter().enumerate() {
                    for &sigma in &sigmas {
                        let vals = self.triangle_pair(i, sigma);
                        for (k, v) in vals.iter().enumerate() {
                            if let Some(&b) = col_of.get(&tris[sigma][k]) {
                                out[(a, b)] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn assemble_dense(&self) -> DenseMatrix {
        let rows: Vec<usize> = (0..self.row_count()).collect();
        let cols: Vec<usize> = (0..self.col_count()).collect();
        self.assemble_block(&rows, &cols)
    }

    /// Integrals of the kernel against the constant on `tau` and the three
    /// corner hats on `sigma` (single layer: only slot 0, the constant).
    fn triangle_pair(&self, tau: usize, sigma: usize) -> [f64; 3] {
        // the single layer kernel is symmetric, evaluating in a fixed order
        // keeps the matrix exactly symmetric
        let (tau, sigma) = match self.layer {
            LayerPotential::Single => (tau.min(sigma), tau.max(sigma)),
            LayerPotential::Double => (tau, sigma),
        };
        let tris = self.mesh.triangles();
        let (a, b) = (tris[tau], tris[sigma]);
        let mut shared = [(0usize, 0usize); 3];
        let mut count = 0;
        for (i, va) in a.iter().enumerate() {
            for (j, vb) in b.iter().enumerate() {
                if va == vb {
                    shared[count] = (i, j);
                    count += 1;
                }
            }
        }
        if count == 0 {
            self.regular_pair(tau, sigma)
        } else {
            self.singular_pair(tau, sigma, &shared[..count])
        }
    }

    fn regular_pair(&self, tau: usize, sigma: usize) -> [f64; 3] {
        let q = &self.regular;
        let (xs, wx) = (q.points(tau), q.weights(tau));
        let (ys, wy) = (q.points(sigma), q.weights(sigma));
        let mut out = [0.0; 3];
        match self.layer {
            LayerPotential::Single => {
                let mut acc = 0.0;
                for (x, wxp) in xs.iter().zip(wx) {
                    let mut inner = 0.0;
                    for (y, wyq) in ys.iter().zip(wy) {
                        inner += wyq * kernel::g(x, y);
                    }
                    acc += wxp * inner;
                }
                out[0] = acc;
            }
            LayerPotential::Double => {
                let n = self.mesh.normal(sigma);
                let bary = q.barycentric();
                for (x, wxp) in xs.iter().zip(wx) {
                    for ((y, wyq), l) in ys.iter().zip(wy).zip(bary) {
                        let v = wxp * wyq * kernel::dg_dn_y(x, y, &n);
                        out[0] += v * l[0];
                        out[1] += v * l[1];
                        out[2] += v * l[2];
                    }
                }
            }
        }
        out
    }

    fn singular_pair(&self, tau: usize, sigma: usize, shared: &[(usize, usize)]) -> [f64; 3] {
        let (rule, pa, pb) = pair_orderings(shared);
        let rule = match rule {
            PairCase::CommonVertex => &self.vertex_rule,
            PairCase::CommonEdge => &self.edge_rule,
            _ => &self.identical_rule,
        };
        let ca = self.mesh.corners(tau);
        let cb = self.mesh.corners(sigma);
        let (a0, b0) = (ca[pa[0]], cb[pb[0]]);
        let (ea1, ea2) = (sub(&ca[pa[1]], &a0), sub(&ca[pa[2]], &a0));
        let (eb1, eb2) = (sub(&cb[pb[1]], &b0), sub(&cb[pb[2]], &b0));
        let jac = 4.0 * self.mesh.area(tau) * self.mesh.area(sigma);
        let mut out = [0.0; 3];
        match self.layer {
            LayerPotential::Single => {
                let mut acc = 0.0;
                for k in 0..rule.len() {
                    let (u, v) = (rule.x[k], rule.y[k]);
                    let x = affine(&a0, &ea1, &ea2, u[0], u[1]);
                    let y = affine(&b0, &eb1, &eb2, v[0], v[1]);
                    acc += rule.weights[k] * kernel::g(&x, &y);
                }
                out[0] = jac * acc;
            }
            LayerPotential::Double => {
                let n = self.mesh.normal(sigma);
                for k in 0..rule.len() {
                    let (u, v) = (rule.x[k], rule.y[k]);
                    let x = affine(&a0, &ea1, &ea2, u[0], u[1]);
                    let y = affine(&b0, &eb1, &eb2, v[0], v[1]);
                    let val = jac * rule.weights[k] * kernel::dg_dn_y(&x, &y, &n);
                    out[pb[0]] += val * (1.0 - v[0] - v[1]);
                    out[pb[1]] += val * v[0];
                    out[pb[2]] += val * v[1];
                }
            }
        }
        out
    }
}

/// Corner orders of both triangles putting the shared corners first, in
/// matching order.
fn pair_orderings(shared: &[(usize, usize)]) -> (PairCase, [usize; 3], [usize; 3]) {
    let complete = |first: &[usize]| -> [usize; 3] {
        let mut order = [0; 3];
        order[..first.len()].copy_from_slice(first);
        let mut k = first.len();
        for c in 0..3 {
            if !first.contains(&c) {
                order[k] = c;
                k += 1;
            }
        }
        order
    };
    let ia: Vec<usize> = shared.iter().map(|s| s.0).collect();
    let ib: Vec<usize> = shared.iter().map(|s| s.1).collect();
    let case = match shared.len() {
        1 => PairCase::CommonVertex,
        2 => PairCase::CommonEdge,
        _ => PairCase::Identical,
    };
    (case, complete(&ia), complete(&ib))
}

/// Checks `0 < delta_scale` and the like for user-facing constructors.
pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {value}")))
    }
}
