//! The network and its persistence.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use config::{KernelSize, TctnConfig};
pub use forward::{
    encode, forward_teacher_forced, fuse_embedding, positional_encoding, spatial_embed,
    transformer_block, Phase,
};
pub use params::{
    init_parameters, parameter_count, parameter_layout, BlockWeights, BoundModel, Init,
    ModelWeights, Parameter, TctnModel,
};
