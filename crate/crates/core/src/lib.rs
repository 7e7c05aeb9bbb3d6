//! Index insurance and input choice for a risk-averse fisher facing
//! stock and extraction risk.

// `!(x > 0.0)` is used on purpose: it rejects NaN as well as non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod economics;
pub mod error;
pub mod experiments;
pub mod optimizer;
pub mod propositions;
pub mod simplex;
pub mod stochastics;

pub use error::{ModelError, Result};
