//! Minimal f64 tensor and reverse-mode autodiff used by the model and the
//! duration predictor.

mod tape;
mod tensor;

pub use tape::{GradStore, Tape, Var};
pub use tensor::Tensor;
