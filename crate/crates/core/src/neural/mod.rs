//! Small differentiable building blocks with hand-written gradients.

mod activation;
mod adam;
pub mod checkpoint;
mod dense;
mod lstm;
mod mlp;
mod params;
mod tensor;

use thiserror::Error;

pub use activation::{cross_entropy, sigmoid, softmax, softmax_backward, softmax_in_place, Activation};
pub use adam::{Adam, LinearAnneal};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseSpec};
pub use lstm::{LstmCell, LstmSpec, LstmStepCache};
pub use mlp::{Mlp, MlpCache, OUTPUT_INIT};
pub use params::{soft_update, ParamBlock, ParamLayout, Parameterized};
pub use tensor::{axpy, dot, Tensor2};

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("non-finite gradient in parameter block {block} (flat index {index})")]
    NonFiniteGradient { block: String, index: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
}
