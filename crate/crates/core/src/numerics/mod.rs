//! Dense linear algebra and the numerical kernels shared by every other module.

mod adam;
mod assignment;
mod linalg;
mod matrix;
mod nnls;
mod rng;

pub use adam::{adam_step, AdamState};
pub use assignment::{assignment_cost, hungarian};
pub use linalg::{
    cholesky, col_softmax, col_softmax_backward, logdet_and_inverse, logdet_psd,
};
pub use matrix::DenseMatrix;
pub use nnls::{nnls, NnlsSolution};
pub use rng::Rng;

/// Probabilities are clamped to this value before any logarithm.
pub const PROB_FLOOR: f64 = 1e-12;
