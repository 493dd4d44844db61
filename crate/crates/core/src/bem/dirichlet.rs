//! Interior Dirichlet problem through the direct formulation
//! `V alpha = (K + M/2) beta`.

use std::str::FromStr;

use super::{BasisKind, BasisSpace, SurfaceQuadrature};
use crate::cg::conjugate_gradient;
use crate::densela::LinearOperator;
use crate::error::{Error, Result};
use crate::geometry::TriangleMesh;
use crate::kernel;
use crate::vec3::{dot, Point3};

/// Quadrature order for right-hand sides and error norms.
pub const ERROR_QUADRATURE_ORDER: usize = 5;
pub const SOLVER_TOLERANCE: f64 = 1e-8;
const PROJECTION_TOLERANCE: f64 = 1e-12;

/// Harmonic functions with known traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicTestCase {
    /// `x1^2 - x3^2`
    F1,
    /// Point source at `(1.2, 1.2, 1.2)`.
    F2,
    /// Point source at `(1.0, 0.25, 1.0)`.
    F3,
    /// The zero function.
    Zero,
}

impl HarmonicTestCase {
    pub const ALL: [Self; 3] = [Self::F1, Self::F2, Self::F3];

    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::Zero => "zero",
        }
    }

    pub fn source(self) -> Option<Point3> {
        match self {
            Self::F2 => Some([1.2, 1.2, 1.2]),
            Self::F3 => Some([1.0, 0.25, 1.0]),
            _ => None,
        }
    }

    pub fn dirichlet(self, x: &Point3) -> f64 {
        match self {
            Self::F1 => x[0] * x[0] - x[2] * x[2],
            Self::F2 | Self::F3 => kernel::g(x, &self.source().unwrap()),
            Self::Zero => 0.0,
        }
    }

    pub fn gradient(self, x: &Point3) -> Point3 {
        match self {
            Self::F1 => [2.0 * x[0], 0.0, -2.0 * x[2]],
            Self::F2 | Self::F3 => {
                let p = self.source().unwrap();
                std::array::from_fn(|k| {
                    let mut e = [0.0; 3];
                    e[k] = 1.0;
                    kernel::dg_dn_x(x, &p, &e)
                })
            }
            Self::Zero => [0.0; 3],
        }
    }

    pub fn neumann(self, x: &Point3, n: &Point3) -> f64 {
        dot(&self.gradient(x), n)
    }
}

impl FromStr for HarmonicTestCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" => Ok(Self::F1),
            "f2" => Ok(Self::F2),
            "f3" => Ok(Self::F3),
            "zero" => Ok(Self::Zero),
            _ => Err(Error::InvalidArgument(format!("unknown test case {s:?}, expected f1, f2 or f3"))),
        }
    }
}

/// `int phi_i psi_j`
pub fn mass_entry(mesh: &TriangleMesh, i: usize, j: usize) -> f64 {
    if mesh.triangles()[i].contains(&j) {
        mesh.area(i) / 3.0
    } else {
        0.0
    }
}

/// `M beta` for the constant x linear mass matrix.
pub fn mass_apply(mesh: &TriangleMesh, beta: &[f64]) -> Vec<f64> {
    mesh.triangles().iter().zip(mesh.areas()).map(|(t, a)| a / 3.0 * (beta[t[0]] + beta[t[1]] + beta[t[2]])).collect()
}

/// Linear x linear Gram matrix applied to `beta`.
pub fn gram_apply(mesh: &TriangleMesh, beta: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.vertex_count()];
    for (t, a) in mesh.triangles().iter().zip(mesh.areas()) {
        let s: f64 = t.iter().map(|&v| beta[v]).sum();
        for &v in t {
            out[v] += a / 12.0 * (s + beta[v]);
        }
    }
    out
}

/// Coefficients of the L2 projection of the Dirichlet trace onto
/// continuous piecewise linears.
pub fn l2_projection(mesh: &TriangleMesh, case: HarmonicTestCase) -> Result<Vec<f64>> {
    project_function(mesh, |x| case.dirichlet(x))
}

pub(crate) fn project_function(mesh: &TriangleMesh, f: impl Fn(&Point3) -> f64) -> Result<Vec<f64>> {
    let space = BasisSpace::new(mesh, BasisKind::Linear);
    let quad = SurfaceQuadrature::new(mesh, ERROR_QUADRATURE_ORDER)?;
    let rhs: Vec<f64> = (0..space.len()).map(|j| quad.integrate(mesh, &space, j, |x, _| f(x))).collect();
    let out = conjugate_gradient(
        |x, y| y.copy_from_slice(&gram_apply(mesh, x)),
        &rhs,
        PROJECTION_TOLERANCE,
        10 * rhs.len() + 100,
    )?;
    Ok(out.x)
}

#[derive(Debug, Clone)]
pub struct DirichletSolution {
    /// Neumann coefficients, one per triangle.
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub residuals: Vec<f64>,
}

/// Solves `V alpha = (K + M/2) beta` by conjugate gradients with matrix
/// vector products through `v` and `k`.
pub fn solve_dirichlet(
    v: &dyn LinearOperator,
    k: &dyn LinearOperator,
    mesh: &TriangleMesh,
    beta: &[f64],
) -> Result<DirichletSolution> {
    let (n, nv) = (mesh.triangle_count(), mesh.vertex_count());
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n} single layer matrix"),
            found: format!("{}x{}", v.nrows(), v.ncols()),
        });
    }
    if k.nrows() != n || k.ncols() != nv || beta.len() != nv {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{nv} double layer matrix and {nv} Dirichlet coefficients"),
            found: format!("{}x{} and {}", k.nrows(), k.ncols(), beta.len()),
        });
    }
    let mut rhs = vec![0.0; n];
    k.apply(beta, &mut rhs);
    for (r, m) in rhs.iter_mut().zip(mass_apply(mesh, beta)) {
        *r += 0.5 * m;
    }
    let out = conjugate_gradient(|x, y| v.apply(x, y), &rhs, SOLVER_TOLERANCE, 10 * n + 100)?;
    Ok(DirichletSolution { alpha: out.x, iterations: out.iterations, residuals: out.residuals })
}

/// `|| dn f - sum alpha_i phi_i ||_L2` with the flat triangle normals.
pub fn neumann_l2_error(mesh: &TriangleMesh, alpha: &[f64], case: HarmonicTestCase) -> Result<f64> {
    if alpha.len() != mesh.triangle_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} coefficients", mesh.triangle_count()),
            found: alpha.len().to_string(),
        });
    }
    let quad = SurfaceQuadrature::new(mesh, ERROR_QUADRATURE_ORDER)?;
    let mut acc = 0.0;
    for (t, a) in alpha.iter().enumerate() {
        let n = mesh.normal(t);
        for (x, w) in quad.points(t).iter().zip(quad.weights(t)) {
            acc += w * (case.neumann(x, &n) - a).powi(2);
        }
    }
    Ok(acc.sqrt())
}
