//! Judgements (`topic_id \t visual_id \t unused \t grade`) and the
//! formula → visual id map (`formula_id \t visual_id`).

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use super::EvalError;

/// Grades at or above this count as relevant (medium and high).
pub const RELEVANT_GRADE: u8 = 2;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    /// topic → visual id → grade (0..=3).
    pub topics: BTreeMap<String, HashMap<String, u8>>,
}

impl Qrels {
    pub fn grade(&self, topic: &str, visual_id: &str) -> Option<u8> {
        self.topics.get(topic)?.get(visual_id).copied()
    }

    pub fn insert(&mut self, topic: &str, visual_id: &str, grade: u8) -> bool {
        self.topics
            .entry(topic.to_string())
            .or_default()
            .insert(visual_id.to_string(), grade)
            .is_none()
    }
}

pub fn read_qrels<R: BufRead>(r: R) -> Result<Qrels, EvalError> {
    let mut q = Qrels::default();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::Malformed { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 tab-separated columns, found {}", cols.len())));
        }
        let grade: u8 = cols[3]
            .trim()
            .parse()
            .ok()
            .filter(|g| *g <= 3)
            .ok_or_else(|| bad(format!("grade {:?} is not in 0..=3", cols[3])))?;
        if !q.insert(cols[0], cols[1], grade) {
            return Err(bad(format!("duplicate judgement for ({}, {})", cols[0], cols[1])));
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VisualMap {
    map: HashMap<String, String>,
}

impl VisualMap {
    pub fn from_pairs<I: IntoIterator<Item = (String, String)>>(pairs: I) -> Self {
        VisualMap {
            map: pairs.into_iter().collect(),
        }
    }

    /// Formulas missing from the map form their own visual group.
    pub fn visual_id<'a>(&'a self, formula_id: &'a str) -> &'a str {
        self.map.get(formula_id).map_or(formula_id, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn read_visual_map<R: BufRead>(r: R) -> Result<VisualMap, EvalError> {
    let mut map = HashMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| EvalError::Malformed { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(bad(format!("expected 2 tab-separated columns, found {}", cols.len())));
        }
        if let Some(prev) = map.insert(cols[0].to_string(), cols[1].to_string()) {
            if prev != cols[1] {
                return Err(bad(format!("formula {} mapped to both {prev} and {}", cols[0], cols[1])));
            }
        }
    }
    Ok(VisualMap { map })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let q = read_qrels("T1\tv1\t0\t3\nT1\tv2\tQ0\t0\nT2\tv1\t0\t2\n".as_bytes()).unwrap();
        assert_eq!(q.grade("T1", "v1"), Some(3));
        assert_eq!(q.grade("T1", "v3"), None);
        assert_eq!(q.topics.len(), 2);
        assert!(read_qrels("T1\tv1\t0\t4\n".as_bytes()).is_err());
        assert!(read_qrels("T1\tv1\t0\t1\nT1\tv1\t0\t2\n".as_bytes()).is_err());
        assert!(read_qrels("T1\tv1\t1\n".as_bytes()).is_err());
    }

    #[test]
    fn visual_map_falls_back_to_formula_id() {
        let m = read_visual_map("f1\tv1\nf2\tv1\n".as_bytes()).unwrap();
        assert_eq!(m.visual_id("f2"), "v1");
        assert_eq!(m.visual_id("f9"), "f9");
        assert!(read_visual_map("f1\tv1\nf1\tv2\n".as_bytes()).is_err());
    }
}
