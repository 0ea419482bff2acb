//! Binary checkpoint for [`MlpField`].
//!
//! All integers and floats are little-endian:
//!
//! | field       | type            |
//! |-------------|-----------------|
//! | magic       | `b"AGFM"`       |
//! | version     | u32 (= 1)       |
//! | horizon     | u32             |
//! | action_dim  | u32             |
//! | feature_dim | u32             |
//! | hidden1     | u32             |
//! | hidden2     | u32             |
//! | tau_floor   | f64             |
//! | shift       | f64 x action_dim |
//! | scale       | f64 x action_dim |
//! | n_params    | u64             |
//! | params      | f64 x n_params  |

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{MlpArch, MlpField};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AGFM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(field: &MlpField, mut w: W) -> Result<()> {
    let arch = field.arch();
    w.write_all(&CHECKPOINT_MAGIC)?;
    for v in [
        CHECKPOINT_VERSION,
        arch.horizon as u32,
        arch.action_dim as u32,
        arch.feature_dim as u32,
        arch.hidden[0] as u32,
        arch.hidden[1] as u32,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&field.tau_floor().to_le_bytes())?;
    for v in field.shift().iter().chain(field.scale()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(field.params().len() as u64).to_le_bytes())?;
    for v in field.params() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated: {e}")))?;
    Ok(buf)
}

fn read_u32(r: &mut impl Read) -> Result<usize> {
    Ok(u32::from_le_bytes(read_array(r)?) as usize)
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<MlpField> {
    if read_array::<4>(&mut r)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)? as u32;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let horizon = read_u32(&mut r)?;
    let action_dim = read_u32(&mut r)?;
    let feature_dim = read_u32(&mut r)?;
    let hidden = [read_u32(&mut r)?, read_u32(&mut r)?];
    if feature_dim != super::FEATURE_DIM {
        return Err(Error::Checkpoint(format!("feature_dim {feature_dim} unsupported")));
    }
    let arch = MlpArch {
        horizon,
        action_dim,
        feature_dim,
        hidden,
    };
    let tau_floor = read_f64(&mut r)?;
    let shift = (0..action_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let scale = (0..action_dim).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
    if n != arch.param_count() {
        return Err(Error::Checkpoint(format!(
            "{n} parameters, architecture needs {}",
            arch.param_count()
        )));
    }
    let params = (0..n).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    MlpField::from_parts(arch, shift, scale, tau_floor, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save_checkpoint(field: &MlpField, path: impl AsRef<Path>) -> Result<()> {
    write_checkpoint(field, BufWriter::new(File::create(path)?))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpField> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
