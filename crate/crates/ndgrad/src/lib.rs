//! Small reverse-mode automatic differentiation engine.
//!
//! Tensors are dense row-major matrices over a [`Scalar`] (`f32` or `f64`).
//! A [`Graph`] records a forward pass; [`Graph::backward`] returns gradients for
//! every parameter leaf, which are accumulated into a [`ParamStore`] and
//! consumed by [`Adam`].

mod adam;
pub mod checkpoint;
pub mod gradcheck;
mod graph;
pub mod layers;
mod params;
mod scalar;
mod tensor;

pub use adam::{adam_update, Adam, BETA1, BETA2, EPSILON};
pub use checkpoint::Checkpoint;
pub use graph::{log_softmax_in_place, Graph, Var};
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tensor::{one_hot, Tensor};

#[derive(Debug, thiserror::Error)]
pub enum GradError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(String),
    #[error("graph already consumed by a backward pass")]
    GraphConsumed,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
