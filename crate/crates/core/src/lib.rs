//! Numerics for the generalized SU(3) Toda system on the plane: closed-form
//! radial solutions, the linearized Legendre spectrum, continuation of the
//! bifurcating radial branches, and integral-identity diagnostics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod continuation;
pub mod diagnostics;
pub mod error;
pub mod radial_calculus;
pub mod spectral;

pub use error::{Error, Result};
