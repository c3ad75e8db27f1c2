//! Double-precision kernels with explicit forward and backward passes.
//!
//! Every differentiable op comes as a forward function plus a backward
//! function taking the upstream gradient; there is no autograd tape. The
//! [`gradcheck`] module verifies each backward against central finite
//! differences.

mod activation;
mod conv;
mod gemm;
pub mod gradcheck;
mod linear;
mod loss;
mod lstm;
mod params;
mod shape;
mod softmax;

use thiserror::Error;

pub use activation::{pointwise, pointwise_backward, Activation};
pub use conv::{conv2d, conv2d_backward, conv_out_dim, Conv2dGrads};
pub use gemm::{gemm, Layout};
pub use linear::{linear, linear_backward, LinearGrads};
pub use loss::{cross_entropy_masked, CE_PROB_FLOOR};
pub use lstm::{bilstm, bilstm_backward, lstm_cell, lstm_cell_backward, BiLstmCache, LstmCache, LstmGrads, LstmParams};
pub use params::{adam_step, Adam, Param, ParamStore};
pub use shape::{concat_channels, nearest_upsample, nearest_upsample_backward, split_channels};
pub use softmax::{softmax_axis, softmax_axis_backward};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("no masked-in pixels")]
    EmptyMask,
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParam(String),
}

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T, NnError> {
    Err(NnError::Shape(msg.into()))
}
