//! From-scratch neural network stack: tensors, layers with hand-derived
//! analytic gradients, the residual temporal-convolution model, and the
//! Nesterov-momentum optimizer.
//!
//! Gradients are exact derivatives of each forward definition and are held to
//! central finite differences in the test suites; there is no autodiff here.
//! All arithmetic is double precision. Forward passes in [`Mode::Infer`] are
//! pure functions (no RNG draws, no statistic updates).

mod activation;
mod batchnorm;
mod checkpoint;
mod conv;
mod dense;
mod model;
mod optimizer;
mod pool;
mod residual;
mod tensor;

pub use activation::{dropout, dropout_backward, relu, relu_backward};
pub use batchnorm::{BatchNorm1d, BnCache};
pub use checkpoint::CHECKPOINT_VERSION;
pub use conv::Conv1d;
pub use dense::{
    cross_entropy, cross_entropy_from_logits, log_softmax, softmax, softmax_cross_entropy_grad,
    Dense,
};
pub use model::{build_res_tcn, ModelConfig, ResTcnModel, Trace};
pub use optimizer::{sgd_nesterov_lookahead, sgd_nesterov_step};
pub use pool::{global_avg_pool, global_avg_pool_backward};
pub use residual::{ResidualUnit, UnitCache};
pub use tensor::{Matrix, Tensor3};

use alloc::string::String;

/// Forward-pass mode: training uses batch statistics and dropout, inference
/// uses running statistics and is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NnError {
    /// Tensor shape does not fit the layer; the message names the layer.
    Shape(String),
    /// Train-mode batch normalization needs at least two values per channel.
    DegenerateBatch,
    LabelOutOfRange { label: usize, classes: usize },
    InvalidConfig(String),
    /// Checkpoint bytes did not decode.
    Corrupt(String),
}

impl core::fmt::Display for NnError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            NnError::Shape(msg) => write!(f, "shape mismatch: {msg}"),
            NnError::DegenerateBatch => {
                write!(f, "batch normalization needs at least 2 values per channel")
            }
            NnError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            NnError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            NnError::Corrupt(msg) => write!(f, "corrupt checkpoint: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for NnError {}

/// One learnable parameter block with its gradient and optimizer velocity,
/// all identically shaped.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: alloc::vec::Vec<f64>,
    pub grad: alloc::vec::Vec<f64>,
    pub velocity: alloc::vec::Vec<f64>,
}

impl Param {
    pub fn new(value: alloc::vec::Vec<f64>) -> Param {
        let len = value.len();
        Param {
            value,
            grad: alloc::vec![0.0; len],
            velocity: alloc::vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}
