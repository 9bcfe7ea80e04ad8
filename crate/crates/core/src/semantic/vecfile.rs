//! Binary vector files, shared by semantic vectors and structural dumps.
//!
//! ```text
//! magic    8 bytes  "SSEMBVEC"
//! version  u32      1
//! d        u32
//! count    u64
//! count × { u16 id length, id bytes (UTF-8), d × f32 }
//! ```
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Provider, SemanticError, SemanticVector};
use crate::scalar::normalize_in_place;

pub const VECFILE_MAGIC: &[u8; 8] = b"SSEMBVEC";
const VERSION: u32 = 1;
pub const DEFAULT_IMPORT_DIM: usize = 384;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorFile {
    pub dim: usize,
    pub entries: Vec<(String, Vec<f32>)>,
}

pub fn write_vector_file<'a, W, I>(mut w: W, dim: usize, rows: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = (&'a str, &'a [f32])>,
    I::IntoIter: ExactSizeIterator,
{
    let rows = rows.into_iter();
    let invalid = |m: String| io::Error::new(io::ErrorKind::InvalidInput, m);
    w.write_all(VECFILE_MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(u32::try_from(dim).map_err(|_| invalid("dimension exceeds u32".into()))?)?;
    w.write_u64::<LittleEndian>(rows.len() as u64)?;
    for (id, v) in rows {
        if v.len() != dim {
            return Err(invalid(format!("vector {id:?} has {} entries, expected {dim}", v.len())));
        }
        let len = u16::try_from(id.len()).map_err(|_| invalid(format!("id {id:?} longer than 65535 bytes")))?;
        w.write_u16::<LittleEndian>(len)?;
        w.write_all(id.as_bytes())?;
        for &x in v {
            w.write_f32::<LittleEndian>(x)?;
        }
    }
    Ok(())
}

fn corrupt(e: io::Error, what: &str) -> SemanticError {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        SemanticError::Corrupt(format!("truncated {what}"))
    } else {
        SemanticError::Io(e)
    }
}

/// Reads a whole vector file as stored (no normalisation, duplicates kept).
pub fn read_vector_file<R: Read>(mut r: R) -> Result<VectorFile, SemanticError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| corrupt(e, "header"))?;
    if &magic != VECFILE_MAGIC {
        return Err(SemanticError::Corrupt("bad magic".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e, "header"))?;
    if version != VERSION {
        return Err(SemanticError::Corrupt(format!("unsupported version {version}")));
    }
    let dim = r.read_u32::<LittleEndian>().map_err(|e| corrupt(e, "header"))? as usize;
    let count = r.read_u64::<LittleEndian>().map_err(|e| corrupt(e, "header"))?;
    if dim == 0 {
        return Err(SemanticError::Corrupt("zero dimension".into()));
    }
    let mut entries = Vec::with_capacity(count.min(1 << 20) as usize);
    for i in 0..count {
        let len = r.read_u16::<LittleEndian>().map_err(|e| corrupt(e, "record"))? as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id).map_err(|e| corrupt(e, "record"))?;
        let id = String::from_utf8(id).map_err(|_| SemanticError::Corrupt(format!("record {i}: id is not UTF-8")))?;
        let mut v = vec![0f32; dim];
        r.read_f32_into::<LittleEndian>(&mut v).map_err(|e| corrupt(e, "record"))?;
        entries.push((id, v));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(SemanticError::Corrupt("trailing bytes after last record".into()));
    }
    Ok(VectorFile { dim, entries })
}

/// Loads precomputed semantic vectors, re-normalising each row. Ids must be
/// unique; `expected_dim` (if given) must match the file.
pub fn import_vectors<R: Read>(
    r: R,
    expected_dim: Option<usize>,
) -> Result<HashMap<String, SemanticVector>, SemanticError> {
    let file = read_vector_file(r)?;
    if let Some(expected) = expected_dim {
        if expected != file.dim {
            return Err(SemanticError::DimensionMismatch {
                expected,
                found: file.dim,
            });
        }
    }
    let mut out = HashMap::with_capacity(file.entries.len());
    for (id, mut v) in file.entries {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(SemanticError::Corrupt(format!("vector {id:?} has non-finite entries")));
        }
        let normalized = normalize_in_place(&mut v);
        if out.contains_key(&id) {
            return Err(SemanticError::DuplicateId(id));
        }
        out.insert(
            id.clone(),
            SemanticVector {
                formula_id: id,
                v,
                provider: Provider::Imported,
                normalized,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(dim: usize, rows: &[(&str, Vec<f32>)]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_vector_file(&mut buf, dim, rows.iter().map(|(i, v)| (*i, v.as_slice()))).unwrap();
        buf
    }

    #[test]
    fn three_vectors_round_trip_normalised() {
        let rows: Vec<(&str, Vec<f32>)> = (0..3)
            .map(|k| (["a", "b", "c"][k], (0..384).map(|i| (i * (k + 1)) as f32 * 0.01 + 1.0).collect()))
            .collect();
        let m = import_vectors(file(384, &rows).as_slice(), Some(384)).unwrap();
        assert_eq!(m.len(), 3);
        for v in m.values() {
            let n: f32 = v.v.iter().map(|x| x * x).sum::<f32>().sqrt();
            assert!((n - 1.0).abs() < 1e-5);
            assert_eq!(v.provider, Provider::Imported);
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let buf = file(2, &[("x", vec![1.0, 0.0])]);
        assert_eq!(&buf[..8], b"SSEMBVEC");
        assert_eq!(&buf[8..12], &[1, 0, 0, 0]);
        assert_eq!(&buf[12..16], &[2, 0, 0, 0]);
        assert_eq!(&buf[16..24], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&buf[24..27], &[1, 0, b'x']);
        assert_eq!(&buf[27..31], &1f32.to_le_bytes());
        assert_eq!(buf.len(), 35);
    }

    #[test]
    fn duplicate_ids_are_named() {
        let buf = file(2, &[("dup", vec![1.0, 0.0]), ("ok", vec![0.0, 1.0]), ("dup", vec![1.0, 1.0])]);
        match import_vectors(buf.as_slice(), None) {
            Err(SemanticError::DuplicateId(id)) => assert_eq!(id, "dup"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_truncation_and_dimension() {
        let mut buf = file(2, &[("a", vec![1.0, 0.0])]);
        assert!(matches!(import_vectors(buf.as_slice(), Some(3)), Err(SemanticError::DimensionMismatch { .. })));
        let short = &buf[..buf.len() - 1];
        assert!(matches!(import_vectors(short, None), Err(SemanticError::Corrupt(_))));
        buf.push(0);
        assert!(matches!(import_vectors(buf.as_slice(), None), Err(SemanticError::Corrupt(_))));
        buf[0] = b'X';
        assert!(matches!(import_vectors(buf.as_slice(), None), Err(SemanticError::Corrupt(_))));
    }

    #[test]
    fn zero_rows_are_kept_but_flagged() {
        let buf = file(2, &[("z", vec![0.0, 0.0])]);
        let m = import_vectors(buf.as_slice(), None).unwrap();
        assert!(!m["z"].normalized);
    }
}
