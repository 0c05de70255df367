//! Temporal convolutional transformer for video frame prediction: a
//! tape-based autodiff engine, the network, a bouncing-sprite data
//! generator, image quality metrics and the training harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autograd;
pub mod datagen;
pub mod error;
pub mod gradcheck;
pub mod harness;
mod io;
pub mod kv;
pub mod metrics;
pub mod model;
pub mod tensor;

pub use datagen::{GeneratorConfig, SequenceBatch, Sprite};
pub use error::{Result, TctnError};
pub use harness::{FramePredictor, LossScope, TrainConfig};
pub use metrics::{FrameMetrics, MetricReport};
pub use model::{KernelSize, Parameter, TctnConfig, TctnModel};
pub use tensor::{Scalar, Tensor};
