//! Quantifying the nonclassicality of single-mode bosonic states through their
//! normal-ordered characteristic functions (CFs).
//!
//! Two routes are provided:
//!
//! * exact degree-of-nonclassicality (DNC) determination for states with a finite
//!   Fock expansion, whose CF is a polynomial ([`focktools`]);
//! * witness-based DNC lower bounds for arbitrary states or sampled CF data, by
//!   comparison against the bound functions `chi_r(|beta|)` computed with a
//!   multi-start ascent ([`bounds`], [`witness`]).

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod charfn;
pub mod error;
pub mod focktools;
pub(crate) mod math;
pub mod states;
pub mod witness;

pub use error::{Error, Result};
pub use num_complex::Complex64;
