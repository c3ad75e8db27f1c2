//! The encoder / temporal-attention / decoder segmentation network.
//!
//! A satellite patch `T_s × C_s × P × P` runs through a stride-2
//! convolutional encoder shared across timestamps, then a per-pixel
//! bidirectional LSTM at the bottleneck. In `wstatt` mode a second BiLSTM
//! encodes the daily weather, every stride-th embedding is picked to match
//! the satellite cadence and broadcast over the bottleneck grid, and the
//! two are concatenated. A linear attention layer scores every timestamp at
//! every pixel; the softmax-weighted sums of the embeddings and of the
//! encoder skip features feed a nearest-upsampling decoder whose last 1×1
//! convolution yields per-pixel class logits.

mod check;
mod checkpoint;
mod config;
mod network;
mod stages;

use thiserror::Error;

use crate::nn::NnError;
use crate::raster::RasterError;

pub use check::{end_to_end_gradcheck, gradcheck_config, E2E_GRAD_FLOOR};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use config::{Mode, ModelConfig};
pub use network::{EarlyPrediction, Forward, Grads, Model};
pub(crate) use network::argmax_classes;
pub use stages::{
    aggregate, aggregate_backward, aggregate_skips, aggregate_skips_backward, align_indices, align_weather, attend,
    attend_backward, fuse, fuse_backward,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}
