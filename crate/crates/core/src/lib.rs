//! Common fixed points of affine semigroups acting on polytopes, and invariant
//! norm-preserving extensions of linear functionals.

pub mod error;
pub mod extension;
pub mod geometry;
pub mod semigroup;
pub mod solver;

pub use error::{Error, Result};
