use std::fs;
use std::path::Path;

use crate::error::{Result, TctnError};

/// A single-channel bitmap with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sprite {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f32>,
    pub label: Option<u8>,
}

impl Sprite {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || pixels.len() != height * width {
            return Err(TctnError::shape(format!(
                "sprite {height}x{width} cannot hold {} pixels",
                pixels.len()
            )));
        }
        Ok(Sprite {
            height,
            width,
            pixels,
            label: None,
        })
    }

    /// A filled square of intensity 1.
    pub fn square(size: usize) -> Result<Self> {
        Sprite::new(size, size, vec![1.0; size * size])
    }
}

/// Offline stand-in for digit sprites: one filled square of `size` pixels.
pub fn square_sprites(size: usize) -> Result<Vec<Sprite>> {
    Ok(vec![Sprite::square(size)?])
}

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// Parses an IDX image file (big-endian header: magic, count, rows, cols,
/// then one unsigned byte per pixel). Bytes are scaled to `[0, 1]`.
pub fn parse_idx(bytes: &[u8]) -> Result<Vec<Sprite>> {
    if bytes.len() < 16 {
        return Err(TctnError::Length {
            expected: 16,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_be_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let magic = word(0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(TctnError::Format(format!(
            "IDX magic {magic:#010x} is not an image file ({IDX_IMAGE_MAGIC:#010x})"
        )));
    }
    let (count, rows, cols) = (word(4) as usize, word(8) as usize, word(12) as usize);
    let size = rows * cols;
    let expected = 16 + count * size;
    if bytes.len() < expected {
        return Err(TctnError::Length {
            expected,
            found: bytes.len(),
        });
    }
    bytes[16..expected]
        .chunks_exact(size.max(1))
        .take(count)
        .map(|chunk| {
            Sprite::new(
                rows,
                cols,
                chunk.iter().map(|&b| b as f32 / 255.0).collect(),
            )
        })
        .collect()
}

/// Reads an uncompressed IDX image file.
pub fn load_idx(path: impl AsRef<Path>) -> Result<Vec<Sprite>> {
    parse_idx(&fs::read(path)?)
}
