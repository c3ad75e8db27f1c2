//! Multimodal (satellite + weather) spatio-temporal crop segmentation with
//! temporal attention.
//!
//! The crate is organized bottom-up:
//!
//! - [`raster`]: containers for satellite/weather/label rasters, the `RTS1`
//!   on-disk format and the label/normalization preprocessing steps.
//! - [`synth`]: a weather-driven phenology generator producing labeled
//!   synthetic scenes with known ground truth.
//! - [`nn`]: double-precision kernels with explicit forward/backward passes.
//! - [`model`]: the encoder / attention / decoder network (`wstatt` mode and
//!   the satellite-only `statt` ablation), plus checkpoints.
//! - [`train`]: training loop, F1 metrics, early-prediction sweeps and
//!   attention export.
//!
//! Data-parallel loops go through [`par`], which falls back to sequential
//! iteration when the `parallel` feature is disabled.

pub mod error;
pub mod model;
pub mod nn;
pub mod par;
pub mod raster;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
