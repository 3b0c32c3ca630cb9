//! Continuous Galerkin-Petrov time stepping combined with Raviart-Thomas
//! mixed finite elements for parabolic problems on quadrilateral meshes.
//!
//! The guide in `book/` explains the method chapter by chapter; its code
//! listings are compiled and run as doctests of this crate.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod harness;
pub mod lagrange;
pub mod mesh;
pub mod mms;
pub mod quadrature;
pub mod spaces;
pub mod sparse;
pub mod time_basis;
pub mod timeloop;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/time-stepping.md")]
    mod time_stepping {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/solvers.md")]
    mod solvers {}
    #[doc = include_str!("../../../book/src/convergence.md")]
    mod convergence {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    mod reproducibility {}
}
