//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "TCTN" | version u32 | config_len u32 | config (key = value text)
//! | param_count u32 | { name_len u32 | name | rank u32 | extents u32* | f32* }*
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::config::TctnConfig;
use super::params::{parameter_layout, Parameter, TctnModel};
use crate::error::{Result, TctnError};
use crate::io::{read_exact, read_f32s, read_u32, write_f32s, write_u32};
use crate::kv;
use crate::tensor::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCTN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<T: Scalar, W: Write>(model: &TctnModel<T>, mut w: W) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    write_u32(&mut w, CHECKPOINT_VERSION)?;
    let config = kv::render(&model.config.to_pairs());
    write_u32(&mut w, config.len() as u32)?;
    w.write_all(config.as_bytes())?;
    let params = model.parameters();
    write_u32(&mut w, params.len() as u32)?;
    for p in params {
        write_u32(&mut w, p.name.len() as u32)?;
        w.write_all(p.name.as_bytes())?;
        write_u32(&mut w, p.value.rank() as u32)?;
        for &e in p.value.shape() {
            write_u32(&mut w, e as u32)?;
        }
        write_f32s(&mut w, p.value.data().iter().map(|v| v.as_f64() as f32))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<TctnModel<T>> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(TctnError::Format(format!(
            "not a checkpoint: magic {magic:?}"
        )));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(TctnError::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config_len = read_u32(&mut r)? as usize;
    let mut config = vec![0u8; config_len];
    read_exact(&mut r, &mut config)?;
    let config = String::from_utf8(config)
        .map_err(|_| TctnError::Format("checkpoint config is not UTF-8".into()))?;
    let config = TctnConfig::from_pairs(kv::parse(&config)?)?;

    let layout = parameter_layout(&config);
    let expected = layout.slots();
    let count = read_u32(&mut r)? as usize;
    if count != expected.len() {
        return Err(TctnError::Format(format!(
            "checkpoint holds {count} parameters, config implies {}",
            expected.len()
        )));
    }
    let mut loaded = Vec::with_capacity(count);
    for (name, shape, _) in expected {
        let name_len = read_u32(&mut r)? as usize;
        let mut buf = vec![0u8; name_len];
        read_exact(&mut r, &mut buf)?;
        if buf != name.as_bytes() {
            return Err(TctnError::Format(format!(
                "expected parameter {name}, found {}",
                String::from_utf8_lossy(&buf)
            )));
        }
        let rank = read_u32(&mut r)? as usize;
        let extents = (0..rank)
            .map(|_| read_u32(&mut r).map(|e| e as usize))
            .collect::<Result<Vec<_>>>()?;
        if &extents != shape {
            return Err(TctnError::Format(format!(
                "parameter {name} has shape {extents:?}, expected {shape:?}"
            )));
        }
        let numel = extents.iter().product();
        let data = read_f32s(&mut r, numel)?
            .into_iter()
            .map(|v| T::of(v as f64))
            .collect();
        loaded.push(Parameter::new(
            name.clone(),
            Tensor::from_vec(data, extents)?,
        ));
    }

    let mut values = loaded.into_iter();
    let weights = layout.map(|_| values.next().expect("count checked"));
    Ok(TctnModel { config, weights })
}

pub fn save_checkpoint<T: Scalar>(model: &TctnModel<T>, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(model, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<TctnModel<T>> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
