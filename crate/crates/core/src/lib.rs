// Negated float comparisons are used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod model;
pub mod numerics;
pub mod objective;
pub mod simulator;
pub mod trainer;

pub use error::{Error, Result};
pub use numerics::DenseMatrix;
