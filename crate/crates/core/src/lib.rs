//! Ginzburg–Landau minimizers in P1 finite element spaces and in localized
//! orthogonal decomposition (LOD) spaces on the unit square.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod field;
pub mod glenergy;
pub mod harness;
pub mod linsolve;
pub mod lodspace;
pub mod mesh;
pub mod minimize;
pub mod par;
pub mod potential;
pub mod quadrature;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
