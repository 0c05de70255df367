//! Reverse-mode automatic differentiation over [`Tensor`](crate::Tensor)s.

mod attention;
mod conv;
mod elementwise;
mod norm;
mod tape;

pub use attention::{causal_attention_weights, masked_temporal_attention};
pub use conv::{causal_conv3d, conv2d_same};
pub use elementwise::{
    add, dropout, leaky_relu, linear, mean, mse_loss, mul, narrow, scale, sub, sum,
};
pub use norm::{layer_norm, LAYER_NORM_EPS};
pub use tape::{backward, Tape, Var};
