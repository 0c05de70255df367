use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::motion::{simulate_bounce, MotionState};
use super::sprite::Sprite;
use crate::error::{Result, TctnError};
use crate::tensor::Tensor;

/// A batch of frame sequences, `[B, L, H, W, C]`, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub tensor: Tensor<f32>,
}

impl SequenceBatch {
    pub fn new(tensor: Tensor<f32>) -> Result<Self> {
        if tensor.rank() != 5 {
            return Err(TctnError::shape(format!(
                "sequence batch must be [B,L,H,W,C], got {:?}",
                tensor.shape()
            )));
        }
        Ok(SequenceBatch { tensor })
    }

    /// Stacks equally shaped `[L, H, W, C]` sequences.
    pub fn from_sequences(seqs: &[Tensor<f32>]) -> Result<Self> {
        let stacked = Tensor::concat(&seqs.iter().collect::<Vec<_>>())?;
        let mut shape = vec![seqs.len()];
        shape.extend_from_slice(seqs[0].shape());
        SequenceBatch::new(stacked.reshape(shape)?)
    }

    pub fn len(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn seq_len(&self) -> usize {
        self.tensor.shape()[1]
    }

    /// `(H, W, C)` of one frame.
    pub fn frame_shape(&self) -> (usize, usize, usize) {
        let s = self.tensor.shape();
        (s[2], s[3], s[4])
    }

    /// Sequence `i` as `[L, H, W, C]`.
    pub fn sequence(&self, i: usize) -> Result<Tensor<f32>> {
        let seq = self.tensor.narrow(i, i + 1)?;
        let shape = seq.shape()[1..].to_vec();
        seq.reshape(shape)
    }
}

/// Canvas, length and motion parameters for bouncing-sprite sequences.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub seq_len: usize,
    pub height: usize,
    pub width: usize,
    pub sprites_per_sequence: usize,
    /// Speeds are drawn uniformly from `[speed_min, speed_max)`.
    pub speed_min: f64,
    pub speed_max: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seq_len: 20,
            height: 64,
            width: 64,
            sprites_per_sequence: 2,
            speed_min: 3.0,
            speed_max: 5.0,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self, sprites: &[Sprite]) -> Result<()> {
        if sprites.is_empty() {
            return Err(TctnError::argument("no sprites available"));
        }
        if self.seq_len == 0 || self.height == 0 || self.width == 0 {
            return Err(TctnError::config(
                "sequence length and canvas must be non-empty",
            ));
        }
        if !(0.0 <= self.speed_min && self.speed_min <= self.speed_max) {
            return Err(TctnError::config(format!(
                "invalid speed range [{}, {})",
                self.speed_min, self.speed_max
            )));
        }
        if let Some(s) = sprites
            .iter()
            .find(|s| s.height > self.height || s.width > self.width)
        {
            return Err(TctnError::config(format!(
                "sprite {}x{} does not fit a {}x{} canvas",
                s.height, s.width, self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Composites sprites at integer (row, col) offsets onto a zero canvas,
/// taking the pixel-wise maximum where they overlap. Returns `[H, W, 1]`.
pub fn render_frame(
    placements: &[(&Sprite, usize, usize)],
    height: usize,
    width: usize,
) -> Result<Tensor<f32>> {
    let mut canvas = vec![0.0f32; height * width];
    for &(sprite, row, col) in placements {
        if row + sprite.height > height || col + sprite.width > width {
            return Err(TctnError::InvalidState(format!(
                "sprite at ({row}, {col}) leaves the {height}x{width} canvas"
            )));
        }
        for (r, src) in sprite.pixels.chunks_exact(sprite.width).enumerate() {
            let dst = &mut canvas[(row + r) * width + col..][..sprite.width];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = d.max(s);
            }
        }
    }
    Tensor::from_vec(canvas, vec![height, width, 1])
}

/// One generated sequence with the motion that produced it.
#[derive(Clone, Debug)]
pub struct GeneratedSequence {
    /// `[L, H, W, 1]`.
    pub frames: Tensor<f32>,
    pub sprite_indices: Vec<usize>,
    /// One trajectory of `L` states per sprite.
    pub trajectories: Vec<Vec<MotionState>>,
}

/// Independent generator for sequence `index` of the dataset seeded by `seed`.
pub fn sequence_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sequence `index` of the dataset determined by `seed`. Sprites are picked
/// uniformly with replacement; positions, directions and speeds uniformly.
pub fn generate_sequence(
    sprites: &[Sprite],
    config: &GeneratorConfig,
    seed: u64,
    index: u64,
) -> Result<GeneratedSequence> {
    config.validate(sprites)?;
    let mut rng = sequence_rng(seed, index);
    let mut sprite_indices = Vec::with_capacity(config.sprites_per_sequence);
    let mut trajectories = Vec::with_capacity(config.sprites_per_sequence);
    for _ in 0..config.sprites_per_sequence {
        let which = rng.gen_range(0..sprites.len());
        let sprite = &sprites[which];
        let max_x = (config.width - sprite.width) as f64;
        let max_y = (config.height - sprite.height) as f64;
        let x = rng.gen_range(0.0..=max_x);
        let y = rng.gen_range(0.0..=max_y);
        let angle = rng.gen_range(0.0..TAU);
        let speed = if config.speed_max > config.speed_min {
            rng.gen_range(config.speed_min..config.speed_max)
        } else {
            config.speed_min
        };
        let start = MotionState {
            x,
            y,
            vx: speed * angle.cos(),
            vy: speed * angle.sin(),
        };
        let path = simulate_bounce(
            start,
            (config.height, config.width),
            (sprite.height, sprite.width),
            config.seq_len - 1,
        )?;
        sprite_indices.push(which);
        trajectories.push(path);
    }

    let mut frames = Vec::with_capacity(config.seq_len);
    for t in 0..config.seq_len {
        let placements: Vec<_> = sprite_indices
            .iter()
            .zip(&trajectories)
            .map(|(&i, path)| {
                let s = path[t];
                (&sprites[i], s.y.round() as usize, s.x.round() as usize)
            })
            .collect();
        frames.push(render_frame(&placements, config.height, config.width)?);
    }
    let frames = Tensor::concat(&frames.iter().collect::<Vec<_>>())?.reshape(vec![
        config.seq_len,
        config.height,
        config.width,
        1,
    ])?;
    Ok(GeneratedSequence {
        frames,
        sprite_indices,
        trajectories,
    })
}

/// Lazily yields sequences `0..count` of the dataset seeded by `seed`.
pub fn sequence_stream<'a>(
    sprites: &'a [Sprite],
    config: &'a GeneratorConfig,
    count: usize,
    seed: u64,
) -> impl Iterator<Item = Result<GeneratedSequence>> + 'a {
    (0..count as u64).map(move |i| generate_sequence(sprites, config, seed, i))
}

/// Generates `count` sequences. Each sequence owns its generator and the
/// result is independent of the thread count.
pub fn generate_dataset(
    sprites: &[Sprite],
    count: usize,
    config: &GeneratorConfig,
    seed: u64,
) -> Result<SequenceBatch> {
    if count == 0 {
        return Err(TctnError::argument("sequence count must be positive"));
    }
    config.validate(sprites)?;
    let seqs = (0..count as u64)
        .into_par_iter()
        .map(|i| generate_sequence(sprites, config, seed, i).map(|g| g.frames))
        .collect::<Result<Vec<_>>>()?;
    SequenceBatch::from_sequences(&seqs)
}
