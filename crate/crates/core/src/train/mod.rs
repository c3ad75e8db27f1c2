//! Training loop, metrics, early-prediction sweeps and attention export.

mod dataset;
mod eval;
mod metrics;
mod trainer;

use thiserror::Error;

pub use dataset::{tile_origins, Dataset, PrepInfo, SceneSample, PREP_FILE};
pub use eval::{
    attention_profile, early_sweep, evaluate_scenes, export_attention, predict_scene, sweep_csv, AttentionProfile, DEFAULT_MONTHS,
};
pub use metrics::{compare_runs, confusion_render, evaluate_f1, ClassMetrics, Confusion, MetricsReport, MinSupport};
pub use trainer::{loss_csv, train, train_with, LossRow, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training diverged at step {step} (epoch {epoch}): loss {loss}")]
    Diverged { step: u64, epoch: usize, loss: f64 },
    #[error("evaluation mask selects no labelled pixels")]
    EmptyMask,
    #[error("class tables differ: {0}")]
    ClassTableMismatch(String),
}
