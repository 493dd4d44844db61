//! Laplace fundamental solution `g(x, y) = 1 / (4 pi |x - y|)` in 3D and its
//! normal derivatives.
//!
//! The checked `eval_*` functions reject coincident points. The unchecked
//! variants are used in quadrature loops where separation is guaranteed by
//! the rule.

use crate::error::{Error, Result};
use crate::vec3::{dot, sub, Point3};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Singularity order of the kernel, `|g(x, y)| ~ |x - y|^-SIGMA`.
pub const SIGMA: i32 = 1;

fn check(x: &Point3, y: &Point3) -> Result<()> {
    if x == y {
        Err(Error::CoincidentPoints)
    } else {
        Ok(())
    }
}

pub fn eval_g(x: &Point3, y: &Point3) -> Result<f64> {
    check(x, y)?;
    Ok(g(x, y))
}

/// `<grad_y g(x, y), n>`.
pub fn eval_dg_dn_y(x: &Point3, y: &Point3, n: &Point3) -> Result<f64> {
    check(x, y)?;
    Ok(dg_dn_y(x, y, n))
}

/// `<grad_x g(x, y), n>`.
pub fn eval_dg_dn_x(x: &Point3, y: &Point3, n: &Point3) -> Result<f64> {
    check(x, y)?;
    Ok(dg_dn_y(y, x, n))
}

/// Mixed derivative `d/dn_x d/dn_y g(x, y)`, needed to factor the double
/// layer kernel in its second argument.
pub fn eval_d2g_dn_x_dn_y(x: &Point3, y: &Point3, nx: &Point3, ny: &Point3) -> Result<f64> {
    check(x, y)?;
    Ok(d2g_dn_x_dn_y(x, y, nx, ny))
}

#[inline]
pub fn g(x: &Point3, y: &Point3) -> f64 {
    let d = sub(x, y);
    1.0 / (FOUR_PI * dot(&d, &d).sqrt())
}

#[inline]
pub fn dg_dn_y(x: &Point3, y: &Point3, n: &Point3) -> f64 {
    let d = sub(x, y);
    let r2 = dot(&d, &d);
    dot(&d, n) / (FOUR_PI * r2 * r2.sqrt())
}

#[inline]
pub fn dg_dn_x(x: &Point3, y: &Point3, n: &Point3) -> f64 {
    dg_dn_y(y, x, n)
}

#[inline]
pub fn d2g_dn_x_dn_y(x: &Point3, y: &Point3, nx: &Point3, ny: &Point3) -> f64 {
    let d = sub(x, y);
    let r2 = dot(&d, &d);
    let r = r2.sqrt();
    (dot(nx, ny) * r2 - 3.0 * dot(&d, nx) * dot(&d, ny)) / (FOUR_PI * r2 * r2 * r)
}
