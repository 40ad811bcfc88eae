//! Radial Green's kernels for the Hodge Laplacian on Euclidean and real
//! hyperbolic space forms, together with the Biot-Savart fields and Gauss
//! linking integrals built from them.
//!
//! The pipeline runs from [`spaceform`] (geometry and exterior algebra) through
//! [`radial_ode`] (the radial equation and its decaying solution) and
//! [`kernel_eval`] (two-point kernels) to [`fields_linking`]. The
//! [`closed_kernels`] module holds the closed-form profiles used as oracles.

pub mod closed_kernels;
pub mod error;
pub mod fields_linking;
pub mod jet;
pub mod kernel_eval;
pub mod quadrature;
pub mod radial_ode;
pub mod spaceform;

pub use error::{Error, Result};
