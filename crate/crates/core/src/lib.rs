#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
//! Numerical core: grids and radial profiles on the unit ball of C^n,
//! contact-set entropies, radial Monge-Ampere solves, the De Giorgi bound,
//! the inverse Monge-Ampere flow and a flat-torus gradient experiment.

extern crate alloc;

pub mod abp;
pub mod calibrate;
pub mod degiorgi;
pub mod error;
pub mod flow;
pub mod fields;
pub mod inequalities;
pub mod linalg;
pub mod ma_radial;
pub mod math;
pub mod parabolic;
pub mod psh;
pub mod quadrature;
pub mod torus;
pub mod weight;

pub use error::{Error, Result};
