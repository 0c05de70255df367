//! Training, autoregressive inference and evaluation.

mod optim;
mod predict;
mod train;

pub use optim::{adam_step, cosine_lr, AdamConfig, OptimizerState};
pub use predict::{
    evaluate, predict_autoregressive, predict_autoregressive_observed, FramePredictor, Persistence,
};
pub use train::{
    dataset_loss, sequence_gradients, shifted_pair, train, LogRecord, LossScope, TrainConfig,
    TrainReport,
};
