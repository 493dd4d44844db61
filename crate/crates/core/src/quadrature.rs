//! Gauss–Legendre rules, tensor rules on box faces and triangles, and
//! regularized rules for singular pairs of touching triangles.
//!
//! Triangle rules live on the reference triangle with corners `(0,0)`,
//! `(1,0)`, `(0,1)`; a point `(u, v)` maps to `p0 + u (p1 - p0) + v (p2 - p0)`.

use crate::error::{Error, Result};

pub const MAX_GAUSS_POINTS: usize = 64;
pub const MAX_TRIANGLE_ORDER: usize = 16;
pub const MAX_PAIR_ORDER: usize = 10;

/// One-dimensional Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule1D {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same rule mapped to `[0, 1]`.
    pub fn unit_interval(&self) -> (Vec<f64>, Vec<f64>) {
        (self.points.iter().map(|x| 0.5 * (x + 1.0)).collect(), self.weights.iter().map(|w| 0.5 * w).collect())
    }
}

/// Legendre polynomial `P_m(x)` and its derivative by the three-term
/// recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// `m`-point Gauss–Legendre rule, nodes by Newton's method from Chebyshev
/// initial guesses. Nodes are returned in ascending order.
pub fn gauss_legendre(m: usize) -> Result<GaussRule1D> {
    if m == 0 || m > MAX_GAUSS_POINTS {
        return Err(Error::InvalidArgument(format!("Gauss-Legendre order must be in 1..={MAX_GAUSS_POINTS}, got {m}")));
    }
    let mut points = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let half = m.div_ceil(2);
    for k in 0..half {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "Legendre root finder",
                iterations: 100,
                residual: legendre_with_derivative(m, x).0.abs(),
                history: Vec::new(),
            });
        }
        // symmetric pair, exact zero for the middle node of odd rules
        if m % 2 == 1 && k == half - 1 {
            x = 0.0;
        }
        let (_, dp) = legendre_with_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        points[k] = -x;
        points[m - 1 - k] = x;
        weights[k] = w;
        weights[m - 1 - k] = w;
    }
    Ok(GaussRule1D { points, weights })
}

/// Tensor rule on the face parameter square `Q = [-1, 1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

pub fn tensor_face_rule(rule: &GaussRule1D) -> FaceRule {
    let mut points = Vec::with_capacity(rule.len() * rule.len());
    let mut weights = Vec::with_capacity(rule.len() * rule.len());
    for (x1, w1) in rule.points.iter().zip(&rule.weights) {
        for (x2, w2) in rule.points.iter().zip(&rule.weights) {
            points.push([*x1, *x2]);
            weights.push(w1 * w2);
        }
    }
    FaceRule { points, weights }
}

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle; weights
/// sum to 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `order` Gauss points per direction of the collapsed square; exact for
/// total degree `2 * order - 2`.
pub fn triangle_tensor_rule(order: usize) -> Result<TriangleRule> {
    if order == 0 || order > MAX_TRIANGLE_ORDER {
        return Err(Error::InvalidArgument(format!(
            "triangle rule order must be in 1..={MAX_TRIANGLE_ORDER}, got {order}"
        )));
    }
    let (x, w) = gauss_legendre(order)?.unit_interval();
    let mut points = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for (a, wa) in x.iter().zip(&w) {
        for (b, wb) in x.iter().zip(&w) {
            points.push([a * (1.0 - b), a * b]);
            weights.push(wa * wb * a);
        }
    }
    Ok(TriangleRule { points, weights })
}

/// How two triangles touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairCase {
    Disjoint,
    CommonVertex,
    CommonEdge,
    Identical,
}

impl PairCase {
    pub fn from_shared_vertices(count: usize) -> Result<Self> {
        match count {
            0 => Ok(Self::Disjoint),
            1 => Ok(Self::CommonVertex),
            2 => Ok(Self::CommonEdge),
            3 => Ok(Self::Identical),
            n => Err(Error::InvalidArgument(format!("unknown pair case: {n} shared vertices"))),
        }
    }

    pub fn shared_vertices(self) -> usize {
        match self {
            Self::Disjoint => 0,
            Self::CommonVertex => 1,
            Self::CommonEdge => 2,
            Self::Identical => 3,
        }
    }
}

/// Four-dimensional rule on a pair of reference triangles.
///
/// Shared corners come first in both triangles: a common vertex is corner
/// 0 of both, a common edge is corners 0 and 1 of both, identical
/// triangles use the same corner order. Weights sum to 1/4.
#[derive(Debug, Clone, PartialEq)]
pub struct TrianglePairRule {
    pub case: PairCase,
    pub x: Vec<[f64; 2]>,
    pub y: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TrianglePairRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn with_capacity(case: PairCase, n: usize) -> Self {
        Self { case, x: Vec::with_capacity(n), y: Vec::with_capacity(n), weights: Vec::with_capacity(n) }
    }

    fn push(&mut self, x: [f64; 2], y: [f64; 2], w: f64) {
        self.x.push(x);
        self.y.push(y);
        self.weights.push(w);
    }
}

/// Regularized rule for a triangle pair with `order` Gauss points per
/// integration direction.
///
/// The transformations move the singular set of the pair into a corner
/// or face of the integration domain where the Jacobian cancels the
/// `1/|x-y|` behaviour, so the transformed integrand is smooth for flat
/// triangles.
pub fn sauter_rule(case: PairCase, order: usize) -> Result<TrianglePairRule> {
    if order == 0 || order > MAX_PAIR_ORDER {
        return Err(Error::InvalidArgument(format!("pair rule order must be in 1..={MAX_PAIR_ORDER}, got {order}")));
    }
    let (g, gw) = gauss_legendre(order)?.unit_interval();
    let tri = triangle_tensor_rule(order)?;
    Ok(match case {
        PairCase::Disjoint => {
            let mut rule = TrianglePairRule::with_capacity(case, tri.len() * tri.len());
            for (x, wx) in tri.points.iter().zip(&tri.weights) {
                for (y, wy) in tri.points.iter().zip(&tri.weights) {
                    rule.push(*x, *y, wx * wy);
                }
            }
            rule
        }
        PairCase::CommonVertex => common_vertex_rule(&g, &gw),
        PairCase::CommonEdge => common_edge_rule(&g, &gw, &tri),
        PairCase::Identical => identical_rule(&g, &gw, &tri),
    })
}

/// Both triangles in polar-like coordinates `(a (1-b), a b)` around the
/// shared corner; the radial pair `(a, a')` is split along `a = a'`.
fn common_vertex_rule(g: &[f64], gw: &[f64]) -> TrianglePairRule {
    let n = g.len();
    let mut rule = TrianglePairRule::with_capacity(PairCase::CommonVertex, 2 * n.pow(4));
    for (xi, wxi) in g.iter().zip(gw) {
        for (eta, weta) in g.iter().zip(gw) {
            let w0 = wxi * weta * xi * xi * xi * eta;
            let (far, near) = (*xi, xi * eta);
            for (b, wb) in g.iter().zip(gw) {
                for (c, wc) in g.iter().zip(gw) {
                    let w = w0 * wb * wc;
                    let x_far = [far * (1.0 - b), far * b];
                    let y_near = [near * (1.0 - c), near * c];
                    let x_near = [near * (1.0 - b), near * b];
                    let y_far = [far * (1.0 - c), far * c];
                    rule.push(x_far, y_near, w);
                    rule.push(x_near, y_far, w);
                }
            }
        }
    }
    rule
}

/// Coordinates: `x = (u, v)`, `y = (u + d, v')` with the common edge on
/// `v = v' = 0`. The singular line is `v = v' = d = 0`; the free
/// coordinate `u` is integrated over its admissible interval of length
/// `1 - N(v, v', d)`, and `(v, v', d)` is written in cone coordinates over
/// the six flat pieces of the unit level set `N = 1`.
fn common_edge_rule(g: &[f64], gw: &[f64], tri: &TriangleRule) -> TrianglePairRule {
    const CONES: [[[f64; 3]; 3]; 6] = [
        [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
        [[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]],
        [[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 0.0, 1.0]],
        [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, -1.0]],
        [[1.0, 0.0, 0.0], [0.0, 1.0, -1.0], [0.0, 0.0, -1.0]],
        [[0.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, -1.0]],
    ];
    let n = g.len();
    let mut rule = TrianglePairRule::with_capacity(PairCase::CommonEdge, 6 * n * n * tri.len());
    for cone in &CONES {
        let [o0, o1, o2] = cone;
        let jac = det3(o0, o1, o2).abs();
        for (pq, wpq) in tri.points.iter().zip(&tri.weights) {
            let dir: [f64; 3] = std::array::from_fn(|k| o0[k] + pq[0] * (o1[k] - o0[k]) + pq[1] * (o2[k] - o0[k]));
            for (s, ws) in g.iter().zip(gw) {
                let (v, vp, d) = (s * dir[0], s * dir[1], s * dir[2]);
                let lo = (-d).max(0.0);
                let len = 1.0 - s;
                let w0 = jac * wpq * ws * s * s * len;
                for (tau, wt) in g.iter().zip(gw) {
                    let u = lo + len * tau;
                    rule.push([u, v], [u + d, vp], w0 * wt);
                }
            }
        }
    }
    rule
}

/// Coordinates: `z = y - x` over the hexagon `T - T`, split into six
/// sectors around the origin; for fixed `z` the admissible `x` form a
/// shrunken copy of the triangle with scale `1 - s`.
///
/// Along a sector edge the transformed kernel behaves like `1 / |z(t)|`,
/// whose complex poles sit close to the edge midpoint, so each edge is
/// split in halves.
fn identical_rule(g: &[f64], gw: &[f64], tri: &TriangleRule) -> TrianglePairRule {
    const HEXAGON: [[f64; 2]; 6] = [[1.0, 0.0], [0.0, 1.0], [-1.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, -1.0]];
    let n = g.len();
    let mut rule = TrianglePairRule::with_capacity(PairCase::Identical, 12 * n * n * tri.len());
    let halves: Vec<(f64, f64)> =
        [0.0, 0.5].iter().flat_map(|lo| g.iter().zip(gw).map(move |(t, w)| (lo + 0.5 * t, 0.5 * w))).collect();
    for i in 0..6 {
        let a = HEXAGON[i];
        let b = HEXAGON[(i + 1) % 6];
        for &(t, wt) in &halves {
            let dir = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            for (s, ws) in g.iter().zip(gw) {
                let z = [s * dir[0], s * dir[1]];
                // barycentric offsets of the shrunken copy
                let c1 = (-z[0]).max(0.0);
                let c2 = (-z[1]).max(0.0);
                let rho = 1.0 - (z[0] + z[1]).max(0.0) - c1 - c2;
                let w0 = wt * ws * s * rho * rho;
                for (mu, wmu) in tri.points.iter().zip(&tri.weights) {
                    let x = [c1 + rho * mu[0], c2 + rho * mu[1]];
                    rule.push(x, [x[0] + z[0], x[1] + z[1]], w0 * wmu);
                }
            }
        }
    }
    rule
}

fn det3(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}
