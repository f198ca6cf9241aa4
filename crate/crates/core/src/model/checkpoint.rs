//! Binary checkpoint layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes   "FVLABCKP"
//! version      u32       1
//! feature_dim  u32
//! hidden_dim   u32
//! embed_dim    u32
//! objective    u8        0 triplet, 1 contrastive, 2 classifier
//! direction    u8        0 V2F, 1 F2V
//! reserved     2 bytes   zero
//! blocks       f32 ...   face W1, b1, W2, b2; voice W1, b1, W2, b2;
//!                        classifier W1, b1, W2, b2, W3, b3 (classifier only)
//! ```
//!
//! Matrices are row-major. Shapes follow from the dims: head W1 is
//! hidden×feature, W2 embed×hidden; classifier W1 is hidden×(2·feature),
//! W2 hidden×hidden, W3 2×hidden.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{Direction, ModelParams, Objective};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FVLABCKP";
const VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParams, mut out: impl Write) -> Result<()> {
    let mut header = Vec::with_capacity(28);
    header.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        params.feature_dim() as u32,
        params.hidden_dim() as u32,
        params.embed_dim() as u32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    header.push(match params.objective {
        Objective::Triplet => 0,
        Objective::Contrastive => 1,
        Objective::Classifier => 2,
    });
    header.push(match params.direction {
        Direction::V2F => 0,
        Direction::F2V => 1,
    });
    header.extend_from_slice(&[0, 0]);
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(params.num_params() * 4);
    for (_, block) in params.blocks() {
        for v in block {
            body.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&body)?;
    Ok(())
}

pub fn read_checkpoint(mut input: impl Read) -> Result<ModelParams> {
    let mut header = [0u8; 28];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Checkpoint("truncated header".into()))?;
    if &header[..8] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (feature_dim, hidden_dim, embed_dim) = (
        u32_at(12) as usize,
        u32_at(16) as usize,
        u32_at(20) as usize,
    );
    let objective = match header[24] {
        0 => Objective::Triplet,
        1 => Objective::Contrastive,
        2 => Objective::Classifier,
        t => return Err(Error::Checkpoint(format!("unknown objective tag {t}"))),
    };
    let direction = match header[25] {
        0 => Direction::V2F,
        1 => Direction::F2V,
        t => return Err(Error::Checkpoint(format!("unknown direction tag {t}"))),
    };
    let mut params = ModelParams::init(feature_dim, hidden_dim, embed_dim, objective, direction, 0)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    let expected = params.num_params() * 4;
    if body.len() != expected {
        return Err(Error::Checkpoint(format!(
            "body holds {} bytes, expected {expected}",
            body.len()
        )));
    }
    let mut chunks = body.chunks_exact(4);
    for (name, block) in params.blocks_mut() {
        for v in block.iter_mut() {
            let c = chunks.next().expect("length checked");
            *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !v.is_finite() {
                return Err(Error::Checkpoint(format!("non-finite value in `{name}`")));
            }
        }
    }
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(params, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    read_checkpoint(fs::File::open(path)?)
}
