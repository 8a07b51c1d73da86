//! Dense f64 tensors with reverse-mode automatic differentiation,
//! gradient verification, and the Adagrad optimizer.

mod gradcheck;
mod optim;
mod tape;
mod tensor;

pub use gradcheck::finite_diff_check;
pub use optim::AdagradState;
pub use tape::{Gradients, NodeId, Tape, UnaryFn};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: lhs shape {lhs:?}, rhs shape {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} does not describe {len} values")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("{op} expects a {expected}, got shape {shape:?}")]
    RankMismatch {
        op: &'static str,
        expected: &'static str,
        shape: Vec<usize>,
    },
    #[error("log of non-positive value {value} at index {index}")]
    LogDomain { index: usize, value: f64 },
    #[error("l1_normalize of a vector with zero L1 norm")]
    DegenerateL1,
    #[error("backward requires a scalar loss node, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("index {index} out of bounds for {what} of size {size}")]
    IndexOutOfBounds {
        what: &'static str,
        index: usize,
        size: usize,
    },
}
