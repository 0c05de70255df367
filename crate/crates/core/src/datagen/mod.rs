//! Bouncing-sprite sequence generation, IDX ingestion and the dataset
//! container format.

mod container;
mod generate;
mod motion;
mod sprite;

pub use container::{
    load_dataset, read_dataset, save_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION,
};
pub use generate::{
    generate_dataset, generate_sequence, render_frame, sequence_rng, sequence_stream,
    GeneratedSequence, GeneratorConfig, SequenceBatch,
};
pub use motion::{simulate_bounce, MotionState};
pub use sprite::{load_idx, parse_idx, square_sprites, Sprite, IDX_IMAGE_MAGIC};
