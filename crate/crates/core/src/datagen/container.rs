//! Dataset container, integers little-endian:
//! `"TCTD" | version u32 | B L H W C (u32 each) | f32 frames, sequence-major`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::generate::SequenceBatch;
use crate::error::{Result, TctnError};
use crate::io::{read_exact, read_f32s, read_u32, write_f32s, write_u32};
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"TCTD";
pub const DATASET_VERSION: u32 = 1;

pub fn write_dataset<W: Write>(batch: &SequenceBatch, mut w: W) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    write_u32(&mut w, DATASET_VERSION)?;
    for &e in batch.tensor.shape() {
        write_u32(&mut w, e as u32)?;
    }
    write_f32s(&mut w, batch.tensor.data().iter().copied())?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<SequenceBatch> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != DATASET_MAGIC {
        return Err(TctnError::Format(format!("not a dataset: magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != DATASET_VERSION {
        return Err(TctnError::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let shape = (0..5)
        .map(|_| read_u32(&mut r).map(|e| e as usize))
        .collect::<Result<Vec<_>>>()?;
    if shape.contains(&0) {
        return Err(TctnError::Format(format!(
            "empty dataset extents {shape:?}"
        )));
    }
    let data = read_f32s(&mut r, shape.iter().product())?;
    SequenceBatch::new(Tensor::from_vec(data, shape)?)
}

pub fn save_dataset(batch: &SequenceBatch, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(batch, BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<SequenceBatch> {
    read_dataset(BufReader::new(File::open(path)?))
}
