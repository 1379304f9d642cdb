//! Numerical toolkit for quadratic forms in heavy-tailed Weibull vectors:
//! sampling, matrix norms, chaos tail statistics, chaining surrogates and RIP
//! certification of partial random circulant matrices.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaining;
pub mod chaos;
pub mod circulant;
pub mod error;
pub mod experiment;
pub mod norms;
pub mod rng;
pub mod stats;
pub mod weibull;

pub use error::{Error, Result};
