//! Cross approximation with full pivoting and the algebraic interpolation
//! operator `V P` it induces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densela::{forward_substitution, solve_unit_lower_right, DenseMatrix, LinearOperator};
use crate::error::{Error, Result};

/// Seed of the start vector for power iterations.
pub const POWER_ITERATION_SEED: u64 = 0x5eed_2a11;

/// `X ~ C D^T` from `rank` crosses.
#[derive(Debug, Clone)]
pub struct CrossApprox {
    pub pivot_rows: Vec<usize>,
    pub pivot_cols: Vec<usize>,
    /// `rows x rank`, column `k` is `c^(k)`.
    pub c: DenseMatrix,
    /// `cols x rank`, column `k` is `d^(k)`.
    pub d: DenseMatrix,
}

impl CrossApprox {
    pub fn rank(&self) -> usize {
        self.pivot_rows.len()
    }

    /// Rows of `C` at the pivot rows; unit lower triangular.
    pub fn pivot_block(&self) -> DenseMatrix {
        self.c.select_rows(&self.pivot_rows)
    }
}

/// Full-pivot cross approximation.
///
/// Stops when the largest remainder entry drops to `tol * max|X|`, at
/// `max_rank` steps, or when the remainder vanishes. Ties between equally
/// large entries go to the smallest row, then column.
pub fn aca_full_pivot(x: &DenseMatrix, tol: f64, max_rank: usize) -> Result<CrossApprox> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be nonnegative, got {tol}")));
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("cross approximation of a non-finite matrix".into()));
    }
    let (rows, cols) = x.shape();
    let mut r = x.clone();
    let threshold = tol * x.max_abs();
    let limit = max_rank.min(rows).min(cols);
    let mut pivot_rows = Vec::new();
    let mut pivot_cols = Vec::new();
    let mut cs: Vec<Vec<f64>> = Vec::new();
    let mut ds: Vec<Vec<f64>> = Vec::new();

    while pivot_rows.len() < limit {
        let (mut pi, mut pj, mut best) = (0, 0, 0.0f64);
        for i in 0..rows {
            for (j, v) in r.row(i).iter().enumerate() {
                if v.abs() > best {
                    best = v.abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best == 0.0 || best <= threshold {
            break;
        }
        let pivot = r[(pi, pj)];
        let c: Vec<f64> = (0..rows).map(|i| if i == pi { 1.0 } else { r[(i, pj)] / pivot }).collect();
        let d = r.row(pi).to_vec();
        for (i, ci) in c.iter().enumerate() {
            if *ci == 0.0 {
                continue;
            }
            for (v, dj) in r.row_mut(i).iter_mut().zip(&d) {
                *v -= ci * dj;
            }
        }
        r.row_mut(pi).fill(0.0);
        for i in 0..rows {
            r[(i, pj)] = 0.0;
        }
        pivot_rows.push(pi);
        pivot_cols.push(pj);
        cs.push(c);
        ds.push(d);
    }

    let k = pivot_rows.len();
    let c = DenseMatrix::from_fn(rows, k, |i, l| cs[l][i]);
    let d = DenseMatrix::from_fn(cols, k, |j, l| ds[l][j]);
    Ok(CrossApprox { pivot_rows, pivot_cols, c, d })
}

/// `V = C (P C)^-1` together with the pivots defining `P`.
#[derive(Debug, Clone)]
pub struct AlgebraicInterpolant {
    pub pivots: Vec<usize>,
    pub v: DenseMatrix,
    /// `P C`, unit lower triangular.
    pub pc: DenseMatrix,
}

impl AlgebraicInterpolant {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    /// `V P x`
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let px: Vec<f64> = self.pivots.iter().map(|&i| x[i]).collect();
        self.v.matvec(&px)
    }

    /// `(P C)^-1 R` by forward substitution.
    pub fn solve_pivot_system(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        forward_substitution(&self.pc, rhs)
    }
}

pub fn build_interpolant(ca: &CrossApprox) -> Result<AlgebraicInterpolant> {
    if ca.rank() == 0 {
        return Err(Error::ContractViolation("interpolant of a rank-0 cross approximation".into()));
    }
    let pc = ca.pivot_block();
    let v = solve_unit_lower_right(&pc, &ca.c)?;
    Ok(AlgebraicInterpolant { pivots: ca.pivot_rows.clone(), v, pc })
}

/// Spectral norm estimate by power iteration on `A^T A` from a fixed
/// pseudo-random start vector.
pub fn estimate_norm2<A: LinearOperator + ?Sized>(a: &A, iters: usize) -> Result<f64> {
    if iters == 0 {
        return Err(Error::InvalidArgument("power iteration needs at least one step".into()));
    }
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_ITERATION_SEED);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; m];
    let mut estimate = 0.0;
    normalize(&mut x);
    for _ in 0..iters {
        a.apply(&x, &mut y);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        a.apply_transposed(&y, &mut x);
        let nx = norm(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        // ||A^T A x|| for unit x tends to sigma_max^2
        let next = nx.sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let done = (next - estimate).abs() <= 1e-15 * next;
        estimate = next;
        if done {
            break;
        }
    }
    a.apply(&x, &mut y);
    Ok(norm(&y).max(estimate))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|a| *a /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::{frobenius_norm, matmul, matmul_transposed};
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn reconstruction_error(x: &DenseMatrix, ca: &CrossApprox) -> f64 {
        let approx = matmul_transposed(&ca.c, &ca.d).unwrap();
        frobenius_norm(&x.sub(&approx).unwrap()) / frobenius_norm(x)
    }

    #[test]
    fn rank_one_stops_after_one_step() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let d = [0.25, 1.0, -1.0];
        let x = DenseMatrix::from_fn(4, 3, |i, j| c[i] * d[j]);
        let ca = aca_full_pivot(&x, 0.0, 10).unwrap();
        assert_eq!(ca.rank(), 1);
        assert_eq!((ca.pivot_rows[0], ca.pivot_cols[0]), (3, 1));
        let rem = x.sub(&matmul_transposed(&ca.c, &ca.d).unwrap()).unwrap();
        assert_eq!(rem.max_abs(), 0.0);
    }

    #[test]
    fn identity_needs_full_rank() {
        let x = DenseMatrix::identity(3);
        let ca = aca_full_pivot(&x, 0.0, 10).unwrap();
        assert_eq!(ca.rank(), 3);
        assert_eq!(ca.pivot_rows, vec![0, 1, 2]);
        assert_eq!(matmul_transposed(&ca.c, &ca.d).unwrap(), x);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let ca = aca_full_pivot(&DenseMatrix::zeros(4, 5), 1e-3, 4).unwrap();
        assert_eq!(ca.rank(), 0);
        assert!(build_interpolant(&ca).is_err());
    }

    #[test]
    fn exact_rank_three() {
        let x = matmul(&random_matrix(20, 3, 1), &random_matrix(3, 12, 2)).unwrap();
        let ca = aca_full_pivot(&x, 1e-12, 12).unwrap();
        assert_eq!(ca.rank(), 3);
        assert!(reconstruction_error(&x, &ca) <= 1e-12);
    }

    #[test]
    fn interpolant_properties() {
        let x = matmul(&random_matrix(15, 6, 3), &random_matrix(6, 9, 4)).unwrap();
        let ca = aca_full_pivot(&x, 0.0, 9).unwrap();
        let ip = build_interpolant(&ca).unwrap();
        // V at the pivot rows is the identity
        let vp = ip.v.select_rows(&ip.pivots);
        assert!(vp.sub(&DenseMatrix::identity(ip.rank())).unwrap().max_abs() <= 1e-12);
        // J X = C D^T
        let jx = matmul(&ip.v, &x.select_rows(&ip.pivots)).unwrap();
        let cd = matmul_transposed(&ca.c, &ca.d).unwrap();
        assert!(frobenius_norm(&jx.sub(&cd).unwrap()) <= 1e-12 * frobenius_norm(&cd));
        // J C = C
        let jc = matmul(&ip.v, &ca.pivot_block()).unwrap();
        assert!(jc.sub(&ca.c).unwrap().max_abs() <= 1e-12 * ca.c.max_abs());

        let single = aca_full_pivot(&x, 0.0, 1).unwrap();
        let ip1 = build_interpolant(&single).unwrap();
        assert_eq!(ip1.v.column(0), single.c.column(0));
        assert_eq!(ip1.v[(single.pivot_rows[0], 0)], 1.0);
    }

    #[test]
    fn norm_estimates() {
        let i5 = DenseMatrix::identity(5);
        assert!((estimate_norm2(&i5, 10).unwrap() - 1.0).abs() < 1e-10);
        let d = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]);
        assert!((estimate_norm2(&d, 50).unwrap() - 3.0).abs() < 1e-6);
        assert_eq!(estimate_norm2(&DenseMatrix::zeros(3, 3), 10).unwrap(), 0.0);
        assert!(estimate_norm2(&d, 0).is_err());

        let a = random_matrix(30, 30, 9);
        let oracle = {
            // Gram power iteration run to stagnation
            let gram = matmul(&a.transpose(), &a).unwrap();
            let mut x = vec![1.0; 30];
            let mut lambda = 0.0;
            for _ in 0..100_000 {
                let y = gram.matvec(&x);
                let n = norm(&y);
                x = y.iter().map(|v| v / n).collect();
                if (n - lambda).abs() <= 1e-12 * n {
                    lambda = n;
                    break;
                }
                lambda = n;
            }
            lambda.sqrt()
        };
        let est = estimate_norm2(&a, 200).unwrap();
        assert!((est - oracle).abs() <= 0.01 * oracle, "{est} vs {oracle}");
    }

    proptest! {
        #[test]
        fn pivots_and_remainder_structure(seed in 0u64..1000, rows in 2usize..20, cols in 2usize..20, steps in 1usize..6) {
            let x = random_matrix(rows, cols, seed);
            let ca = aca_full_pivot(&x, 0.0, steps).unwrap();
            let pc = ca.pivot_block();
            let scale = x.max_abs();
            for a in 0..ca.rank() {
                prop_assert_eq!(pc[(a, a)], 1.0);
                for b in a + 1..ca.rank() {
                    prop_assert_eq!(pc[(a, b)], 0.0);
                }
            }
            let rem = x.sub(&matmul_transposed(&ca.c, &ca.d).unwrap()).unwrap();
            for &i in &ca.pivot_rows {
                prop_assert!(rem.row(i).iter().all(|v| v.abs() <= 1e-12 * scale));
            }
            for &j in &ca.pivot_cols {
                prop_assert!(rem.column(j).iter().all(|v| v.abs() <= 1e-12 * scale));
            }
        }

        #[test]
        fn first_pivot_is_global_argmax(seed in 0u64..1000) {
            let x = random_matrix(7, 5, seed);
            let ca = aca_full_pivot(&x, 0.0, 1).unwrap();
            let best = x[(ca.pivot_rows[0], ca.pivot_cols[0])].abs();
            prop_assert_eq!(best, x.max_abs());
        }

        #[test]
        fn interpolation_is_idempotent(seed in 0u64..1000) {
            let x = random_matrix(12, 8, seed);
            let ca = aca_full_pivot(&x, 0.0, 5).unwrap();
            let ip = build_interpolant(&ca).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
            let v: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let once = ip.apply(&v);
            let twice = ip.apply(&once);
            let n = norm(&once).max(1e-300);
            let diff: f64 = once.iter().zip(&twice).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            prop_assert!(diff <= 1e-12 * n);
        }
    }

    #[test]
    fn ties_prefer_smallest_indices() {
        let x = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![-2.0, 2.0]]);
        let ca = aca_full_pivot(&x, 0.0, 1).unwrap();
        assert_eq!((ca.pivot_rows[0], ca.pivot_cols[0]), (0, 1));
    }
}
