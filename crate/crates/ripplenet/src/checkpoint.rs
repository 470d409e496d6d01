//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "RNCK"
//! version u32      currently 1
//! dim     u64
//! counts  3 x u64  entities, items, relations
//! tables  f64 xN   entity rows, then item rows, then relation matrices
//! ```
//!
//! Floats are written as raw IEEE-754 bit patterns, so a save/load round
//! trip reproduces the model bit for bit, and identical models produce
//! byte-identical files.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::ModelParams;

const MAGIC: [u8; 4] = *b"RNCK";
const VERSION: u32 = 1;

/// Everything that can go wrong reading or writing a checkpoint.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o failed: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint ends before its declared tables")]
    Truncated,
    #[error("checkpoint has bytes after its declared tables")]
    TrailingBytes,
    #[error("checkpoint header is inconsistent: {0}")]
    Malformed(&'static str),
}

/// Write `params` to `path`, replacing any existing file.
pub fn save(params: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_to(params, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Read a model previously written by [`save`].
pub fn load(path: &Path) -> Result<ModelParams, CheckpointError> {
    let mut reader = BufReader::new(File::open(path)?);
    read_from(&mut reader)
}

/// Serialize `params` into any writer; see the module docs for the layout.
pub fn write_to(params: &ModelParams, out: &mut impl Write) -> Result<(), CheckpointError> {
    out.write_all(&MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    for count in [
        params.dim(),
        params.entity_count(),
        params.item_count(),
        params.relation_count(),
    ] {
        out.write_all(&(count as u64).to_le_bytes())?;
    }
    for table in [params.entity_table(), params.item_table(), params.relation_table()] {
        for &x in table {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Deserialize a model from any reader, verifying magic, version, and that
/// the stream holds exactly the declared tables and nothing more.
pub fn read_from(input: &mut impl Read) -> Result<ModelParams, CheckpointError> {
    let mut magic = [0u8; 4];
    read_fully(input, &mut magic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(read_array(input)?);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }

    let dim = read_count(input)?;
    let entities = read_count(input)?;
    let items = read_count(input)?;
    let relations = read_count(input)?;
    if dim == 0 {
        return Err(CheckpointError::Malformed("embedding dimension is zero"));
    }
    let entity_len = entities
        .checked_mul(dim)
        .ok_or(CheckpointError::Malformed("entity table size overflows"))?;
    let item_len = items
        .checked_mul(dim)
        .ok_or(CheckpointError::Malformed("item table size overflows"))?;
    let relation_len = relations
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(dim))
        .ok_or(CheckpointError::Malformed("relation table size overflows"))?;

    let entity = read_floats(input, entity_len)?;
    let item = read_floats(input, item_len)?;
    let relation = read_floats(input, relation_len)?;

    let mut probe = [0u8; 1];
    if input.read(&mut probe)? != 0 {
        return Err(CheckpointError::TrailingBytes);
    }

    ModelParams::from_parts(dim, entity, item, relation)
        .map_err(|_| CheckpointError::Malformed("table lengths disagree with header"))
}

fn read_fully(input: &mut impl Read, buf: &mut [u8]) -> Result<(), CheckpointError> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CheckpointError::Truncated
        } else {
            CheckpointError::Io(e)
        }
    })
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N], CheckpointError> {
    let mut buf = [0u8; N];
    read_fully(input, &mut buf)?;
    Ok(buf)
}

fn read_count(input: &mut impl Read) -> Result<usize, CheckpointError> {
    let raw = u64::from_le_bytes(read_array(input)?);
    usize::try_from(raw).map_err(|_| CheckpointError::Malformed("count exceeds address space"))
}

fn read_floats(input: &mut impl Read, len: usize) -> Result<Vec<f64>, CheckpointError> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(f64::from_le_bytes(read_array(input)?));
    }
    Ok(out)
}
