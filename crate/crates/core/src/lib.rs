#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Numerical certification of polynomial dichotomies for evolution families
//! on `[1, inf)`.

pub mod admissibility;
pub mod cli;
pub mod dichotomy;
pub mod error;
pub mod evolution;
pub mod fit;
pub mod grid;
pub mod linalg;
pub mod norms;
pub mod quadrature;
pub mod robustness;

pub use error::{Error, Result};
