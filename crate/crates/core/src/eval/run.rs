//! Run files: `topic_id \t formula_id \t post_id \t rank \t score \t run_tag`.

use std::io::{BufRead, Write};

use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub topic_id: String,
    pub formula_id: String,
    pub post_id: String,
    pub rank: usize,
    pub score: f64,
    pub run_tag: String,
}

pub fn read_run<R: BufRead>(r: R) -> Result<Vec<RunRow>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| EvalError::Malformed { line: line_no, message };
        if cols.len() != 6 {
            return Err(bad(format!("expected 6 tab-separated columns, found {}", cols.len())));
        }
        let rank: usize = cols[3].parse().map_err(|_| bad(format!("rank {:?} is not a positive integer", cols[3])))?;
        if rank == 0 {
            return Err(bad("rank must be at least 1".into()));
        }
        let score: f64 = cols[4].parse().map_err(|_| bad(format!("score {:?} is not a number", cols[4])))?;
        if !score.is_finite() {
            return Err(bad(format!("score {:?} is not finite", cols[4])));
        }
        rows.push(RunRow {
            topic_id: cols[0].to_string(),
            formula_id: cols[1].to_string(),
            post_id: cols[2].to_string(),
            rank,
            score,
            run_tag: cols[5].to_string(),
        });
    }
    Ok(rows)
}

/// Scores are printed in shortest round-trip form, so output is
/// byte-stable for identical inputs.
pub fn write_run<W: Write>(mut w: W, rows: &[RunRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.topic_id, r.formula_id, r.post_id, r.rank, r.score, r.run_tag
        )?;
    }
    Ok(())
}
