#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bem;
pub mod cg;
pub mod cluster;
pub mod crossapprox;
pub mod densela;
pub mod error;
pub mod geometry;
pub mod green;
pub mod hierarchy;
pub mod kernel;
pub mod quadrature;
pub mod vec3;

pub use error::{Error, Result};
