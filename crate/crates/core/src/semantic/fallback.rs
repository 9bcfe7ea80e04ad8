//! Hashed bag-of-words embedding used when no precomputed vectors exist.
//!
//! Text is lowercased and split on non-alphanumeric characters. A token `t`
//! seen `c` times adds `±ln(1 + c)` to coordinate `fnv1a64(t) mod d`, with
//! the sign taken from bit 63 of the hash. The result is L2-normalised.

use std::collections::BTreeMap;
use std::hash::Hasher;

use fnv::FnvHasher;

use super::{Provider, SemanticVector};

pub const DEFAULT_FALLBACK_DIM: usize = 256;

/// 64-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a64(s: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(s.as_bytes());
    h.finish()
}

pub fn embed_text_fallback(formula_id: &str, text: &str, dim: usize) -> SemanticVector {
    assert!(dim > 0, "embedding dimension must be positive");
    let lower = text.to_lowercase();
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for tok in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        *counts.entry(tok).or_insert(0) += 1;
    }
    let mut acc = vec![0.0f64; dim];
    for (tok, c) in counts {
        let h = fnv1a64(tok);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[(h % dim as u64) as usize] += sign * (1.0 + c as f64).ln();
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    let normalized = norm > 0.0;
    let v = if normalized {
        acc.iter().map(|x| (x / norm) as f32).collect()
    } else {
        vec![0.0; dim]
    };
    SemanticVector {
        formula_id: formula_id.to_string(),
        v,
        provider: Provider::Fallback,
        normalized,
    }
}
