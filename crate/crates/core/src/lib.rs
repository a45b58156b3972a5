// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod error;
pub mod baselines;
pub mod data;
pub mod eval;
pub mod grid;
pub mod physics;
pub mod pipeline;
pub mod solve;

pub use error::{Error, Result};
