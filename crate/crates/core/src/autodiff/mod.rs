//! Reverse-mode automatic differentiation over real tensors.
//!
//! Values live on a [`Tape`]; every operation on a [`Var`] appends a node that
//! caches its forward value, and [`Tape::backward`] walks the nodes in reverse
//! creation order. Complex matrices are carried as real/imaginary pairs
//! ([`CVar`]) and their products are plain compositions of real operations;
//! only the matrix inverse has a dedicated adjoint.
//!
//! A tape is a single-threaded context. Independent tapes share nothing and
//! can live on different threads.

mod complex;
pub mod gradcheck;
mod kernels;
pub mod special;
mod tape;
mod tensor;

pub use complex::CVar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("singular matrix in {op}: pivot {pivot} has magnitude {magnitude:e}")]
    Singular {
        op: &'static str,
        pivot: usize,
        magnitude: f64,
    },
    #[error("backward needs a one-element root, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
}

pub type Result<T> = std::result::Result<T, AdError>;
