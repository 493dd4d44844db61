//! Conjugate gradients for symmetric positive definite operators.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative residual `|r_k| / |b|` after every iteration, starting with
    /// the initial one.
    pub residuals: Vec<f64>,
}

/// Solves `A x = b` from `x = 0` until `|r| <= tol |b|`.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, residuals: vec![0.0] });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut residuals = vec![1.0];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NoConvergence {
                what: "conjugate gradients (operator not positive definite)",
                iterations: it,
                residual: rr.sqrt() / bnorm,
                history: residuals,
            });
        }
        let alpha = rr / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rr_next = dot(&r, &r);
        let rel = rr_next.sqrt() / bnorm;
        residuals.push(rel);
        if rel <= tol {
            return Ok(CgOutcome { x, iterations: it, residuals });
        }
        let beta = rr_next / rr;
        rr = rr_next;
        for k in 0..n {
            p[k] = r[k] + beta * p[k];
        }
    }
    Err(Error::NoConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
        residual: *residuals.last().unwrap(),
        history: residuals,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::DenseMatrix;

    #[test]
    fn solves_spd_system() {
        let n = 30;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                4.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = conjugate_gradient(|x, y| y.copy_from_slice(&a.matvec(x)), &b, 1e-12, 200).unwrap();
        let r: Vec<f64> = a.matvec(&out.x).iter().zip(&b).map(|(u, v)| u - v).collect();
        assert!(norm(&r) <= 1e-11 * norm(&b));
        assert_eq!(out.residuals.len(), out.iterations + 1);
    }

    #[test]
    fn zero_rhs_and_failures() {
        let out = conjugate_gradient(|x, y| y.copy_from_slice(x), &[0.0; 4], 1e-8, 10).unwrap();
        assert_eq!(out.x, vec![0.0; 4]);
        let neg = conjugate_gradient(|x, y| y.iter_mut().zip(x).for_each(|(a, b)| *a = -b), &[1.0; 3], 1e-8, 10);
        assert!(matches!(neg, Err(Error::NoConvergence { .. })));
        let a = DenseMatrix::from_fn(50, 50, |i, j| if i == j { 1.0 + i as f64 * 100.0 } else { 0.0 });
        let slow = conjugate_gradient(|x, y| y.copy_from_slice(&a.matvec(x)), &[1.0; 50], 1e-14, 3);
        match slow {
            Err(Error::NoConvergence { history, .. }) => assert_eq!(history.len(), 4),
            other => panic!("{other:?}"),
        }
    }
}
