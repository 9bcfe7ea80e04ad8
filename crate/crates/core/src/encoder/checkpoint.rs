//! Binary model checkpoint.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic      6 bytes  "SSEMB1"
//! V          u32      vocabulary size (reserved tokens included)
//! d_s        u32      embedding width
//! L          u32      GIN layer count
//! vocab      V × { u32 byte length, UTF-8 label }
//! tensors    f32, row-major, in this order:
//!            embedding               V × d_s
//!            for each layer 1..=L:   w1 d_s×d_s, b1 d_s, w2 d_s×d_s, b2 d_s, eps 1
//!            head w                  d_s × d_s
//!            head b                  d_s
//! ```
//!
//! Weights are stored in single precision regardless of the in-memory
//! scalar type.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use super::params::{HeadOrder, ModelParams, Weights};
use super::vocab::NodeVocab;
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"SSEMB1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a model checkpoint (bad magic)")]
    BadMagic,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_checkpoint<T: Scalar, W: Write>(mut w: W, params: &ModelParams<T>) -> io::Result<()> {
    let dims = |x: usize| u32::try_from(x).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dimension exceeds u32"));
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(dims(params.vocab.len())?)?;
    w.write_u32::<LittleEndian>(dims(params.dim())?)?;
    w.write_u32::<LittleEndian>(dims(params.num_layers())?)?;
    for label in params.vocab.labels() {
        w.write_u32::<LittleEndian>(dims(label.len())?)?;
        w.write_all(label.as_bytes())?;
    }
    for t in params.weights.tensors() {
        for &x in t {
            w.write_f32::<LittleEndian>(x.to_f64_lossy() as f32)?;
        }
    }
    w.flush()
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut r: R) -> Result<ModelParams<T>, CheckpointError> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(|_| CheckpointError::BadMagic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let truncated = |e: io::Error| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            CheckpointError::Corrupt("truncated".into())
        } else {
            CheckpointError::Io(e)
        }
    };
    let v = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    let l = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
    if d == 0 || l == 0 {
        return Err(CheckpointError::Corrupt(format!("degenerate dims d={d} L={l}")));
    }
    let mut labels = Vec::with_capacity(v.min(1 << 20));
    for _ in 0..v {
        let len = r.read_u32::<LittleEndian>().map_err(truncated)? as usize;
        let mut buf = Vec::new();
        (&mut r).take(len as u64).read_to_end(&mut buf)?;
        if buf.len() != len {
            return Err(CheckpointError::Corrupt("truncated vocabulary".into()));
        }
        labels.push(String::from_utf8(buf).map_err(|_| CheckpointError::Corrupt("label is not UTF-8".into()))?);
    }
    let vocab = NodeVocab::from_labels(labels, 0).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
    let mut weights = Weights::<T>::zeros(v, d, l);
    for t in weights.tensors_mut() {
        for x in t.iter_mut() {
            *x = T::of(r.read_f32::<LittleEndian>().map_err(truncated)? as f64);
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(CheckpointError::Corrupt("trailing bytes".into()));
    }
    Ok(ModelParams {
        vocab,
        weights,
        head_order: HeadOrder::default(),
    })
}
