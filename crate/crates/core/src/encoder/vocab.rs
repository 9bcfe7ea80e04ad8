use std::collections::HashMap;

use super::EncodeError;
use crate::augment::{is_wildcard, MASK_TOKEN};
use crate::formula_ir::OpgGraph;

pub const UNK_TOKEN: &str = "[UNK]";
pub const WILD_TOKEN: &str = "[WILD]";
pub const UNK_INDEX: usize = 0;
pub const MASK_INDEX: usize = 1;
pub const WILD_INDEX: usize = 2;
pub const RESERVED: [&str; 3] = [UNK_TOKEN, MASK_TOKEN, WILD_TOKEN];

/// Node-label vocabulary. Indices `0..3` are `[UNK]`, `[MASK]`, `[WILD]`;
/// kept corpus labels follow in descending frequency, ties by label bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeVocab {
    labels: Vec<String>,
    index: HashMap<String, usize>,
    min_frequency: usize,
}

impl NodeVocab {
    pub const DEFAULT_MIN_FREQUENCY: usize = 11;

    /// Counts node labels over `corpus` and keeps those seen at least
    /// `min_frequency` times. Wildcard-shaped and reserved labels are never
    /// counted.
    pub fn build<'a, I>(corpus: I, min_frequency: usize) -> Result<Self, EncodeError>
    where
        I: IntoIterator<Item = &'a OpgGraph>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let mut graphs = 0usize;
        for g in corpus {
            graphs += 1;
            for l in g.labels() {
                if is_wildcard(l) || RESERVED.contains(&l.as_str()) {
                    continue;
                }
                *counts.entry(l.as_str()).or_default() += 1;
            }
        }
        if graphs == 0 {
            return Err(EncodeError::EmptyCorpus);
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_frequency.max(1))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
        let labels = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(l, _)| l.to_string()))
            .collect();
        Ok(Self::from_labels_unchecked(labels, min_frequency))
    }

    /// Rebuilds a vocabulary from its ordered label list (reserved first).
    pub fn from_labels(labels: Vec<String>, min_frequency: usize) -> Result<Self, EncodeError> {
        if labels.len() < RESERVED.len() || labels.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err(EncodeError::Vocab("reserved tokens missing or out of order".into()));
        }
        let v = Self::from_labels_unchecked(labels, min_frequency);
        if v.index.len() != v.labels.len() {
            return Err(EncodeError::Vocab("duplicate label".into()));
        }
        Ok(v)
    }

    fn from_labels_unchecked(labels: Vec<String>, min_frequency: usize) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        NodeVocab {
            labels,
            index,
            min_frequency,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Row index for a node label: wildcards map to `[WILD]`, unknown labels
    /// to `[UNK]`.
    pub fn resolve(&self, label: &str) -> usize {
        if is_wildcard(label) {
            return WILD_INDEX;
        }
        self.index.get(label).copied().unwrap_or(UNK_INDEX)
    }
}
