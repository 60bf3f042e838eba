//! Dense `f64` matrix numerics: storage, activations, the optimizer, seeded
//! initialization, finite-difference checking and the text matrix format.

mod activation;
mod adam;
mod gradcheck;
pub mod io;
mod matrix;
mod rng;

pub use activation::{activation_grad, apply_activation, sigmoid, softmax_row, Activation};
pub use adam::{adam_step, AdamState, OptimConfig, UpdateRule};
pub use gradcheck::finite_diff_check;
pub use io::{read_matrix, write_matrix};
pub use matrix::Matrix;
pub(crate) use matrix::dot;
pub use rng::{RngSeed, SeededRng};
