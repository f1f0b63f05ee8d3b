//! Binary checkpoint container: a magic tag, a format version, then a list of
//! named tensors. All multi-byte fields are little-endian:
//!
//! ```text
//! "MPCK"  u16 version  u32 entry_count
//! per entry: u16 name_len, name bytes (UTF-8), u8 rank,
//!            rank x u32 dims, prod(dims) x f32 payload
//! ```
//!
//! The reader is hardened against malformed input: every length field is
//! bounds-checked before allocation and all failures surface as errors, never
//! panics.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MPCK";
pub const CHECKPOINT_VERSION: u16 = 1;

pub const MAX_NAME_LEN: usize = 4096;
pub const MAX_RANK: usize = 8;
pub const MAX_ELEMENTS: u64 = 1 << 24;
pub const MAX_ENTRIES: u32 = 65536;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("malformed checkpoint: {0}")]
    Corrupt(String),
}

/// One named tensor as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, CheckpointError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Serialize `entries` in on-disk order. Tensor payloads are narrowed to f32.
pub fn write_entries<S: Scalar, W: Write>(
    w: &mut W,
    entries: &[(String, Tensor<S>)],
) -> Result<(), CheckpointError> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let count = u32::try_from(entries.len())
        .map_err(|_| CheckpointError::Corrupt("too many entries".into()))?;
    if count > MAX_ENTRIES {
        return Err(CheckpointError::Corrupt(format!(
            "{count} entries exceeds the {MAX_ENTRIES} limit"
        )));
    }
    w.write_all(&count.to_le_bytes())?;
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > MAX_NAME_LEN {
            return Err(CheckpointError::Corrupt(format!(
                "entry name longer than {MAX_NAME_LEN} bytes"
            )));
        }
        w.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
        w.write_all(name_bytes)?;
        let shape = tensor.shape();
        if shape.len() > MAX_RANK {
            return Err(CheckpointError::Corrupt(format!(
                "rank {} exceeds the {MAX_RANK} limit",
                shape.len()
            )));
        }
        w.write_all(&[shape.len() as u8])?;
        for &d in shape {
            let d = u32::try_from(d)
                .map_err(|_| CheckpointError::Corrupt("dimension too large".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
        let data = tensor.data();
        for &v in data.iter() {
            w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Parse a checkpoint stream into its entries.
pub fn read_entries<R: Read>(r: &mut R) -> Result<Vec<CheckpointEntry>, CheckpointError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u16(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let count = read_u32(r)?;
    if count > MAX_ENTRIES {
        return Err(CheckpointError::Corrupt(format!(
            "{count} entries exceeds the {MAX_ENTRIES} limit"
        )));
    }
    let mut entries = Vec::new();
    for _ in 0..count {
        let name_len = read_u16(r)? as usize;
        if name_len > MAX_NAME_LEN {
            return Err(CheckpointError::Corrupt(format!(
                "name length {name_len} exceeds the {MAX_NAME_LEN} limit"
            )));
        }
        let mut name_buf = vec![0u8; name_len];
        r.read_exact(&mut name_buf)?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| CheckpointError::Corrupt("entry name is not UTF-8".into()))?;

        let mut rank_buf = [0u8; 1];
        r.read_exact(&mut rank_buf)?;
        let rank = rank_buf[0] as usize;
        if rank > MAX_RANK {
            return Err(CheckpointError::Corrupt(format!(
                "rank {rank} exceeds the {MAX_RANK} limit"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut elements: u64 = 1;
        for _ in 0..rank {
            let d = read_u32(r)? as u64;
            elements = elements
                .checked_mul(d)
                .ok_or_else(|| CheckpointError::Corrupt("element count overflow".into()))?;
            shape.push(d as usize);
        }
        if elements > MAX_ELEMENTS {
            return Err(CheckpointError::Corrupt(format!(
                "{elements} elements exceeds the {MAX_ELEMENTS} limit"
            )));
        }
        let mut data = vec![0f32; elements as usize];
        let mut buf = [0u8; 4];
        for v in data.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f32::from_le_bytes(buf);
        }
        entries.push(CheckpointEntry { name, shape, data });
    }
    Ok(entries)
}

pub fn save_to_path<S: Scalar, P: AsRef<Path>>(
    path: P,
    entries: &[(String, Tensor<S>)],
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_entries(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

pub fn load_from_path<P: AsRef<Path>>(path: P) -> Result<Vec<CheckpointEntry>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    read_entries(&mut r)
}

/// Parse a checkpoint held fully in memory.
pub fn load_from_bytes(bytes: &[u8]) -> Result<Vec<CheckpointEntry>, CheckpointError> {
    let mut cur = bytes;
    read_entries(&mut cur)
}
