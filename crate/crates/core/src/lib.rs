// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod error;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod random;
pub mod row;
pub mod sampler;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
