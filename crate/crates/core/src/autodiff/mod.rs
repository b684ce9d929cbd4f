//! Reverse-mode automatic differentiation over dense `f64` tensors.

mod check;
pub mod kernels;
mod tape;
mod tensor;

pub use check::finite_diff_check;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Floor applied to probabilities before they are logged or divided by.
pub const PROB_FLOOR: f64 = 1e-12;
