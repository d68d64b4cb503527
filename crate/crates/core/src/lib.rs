//! Arbitrary-precision Jacobi theta functions.

// `!(x >= y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod bundle;
pub mod error;
pub mod evaluate;
pub mod fast;
pub mod fseq;
pub mod harness;
pub mod identities;
pub mod io;
pub mod mpcx;
pub mod naive;
pub mod reduction;
pub mod sample;
pub mod selftest;
pub mod tracked;

pub use error::{Result, ThetaError};
