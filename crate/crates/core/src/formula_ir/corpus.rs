//! Corpus TSV rows: `formula_id \t post_id \t opt_sexpr \t context_text`.
//!
//! UTF-8, no header. Tabs, newlines, carriage returns and backslashes inside
//! fields are escaped as `\t`, `\n`, `\r` and `\\`.

use std::io::{BufRead, Write};

use super::IrError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormulaRecord {
    pub formula_id: String,
    pub post_id: String,
    /// LaTeX or operator-tree s-expression.
    pub source_text: String,
    pub context: String,
}

pub fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(ch) = chars.next() {
        if ch != '\\' {
            out.push(ch);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

impl FormulaRecord {
    pub fn parse_tsv_line(line: &str, line_no: usize) -> Result<Self, IrError> {
        let line = line.strip_suffix('\r').unwrap_or(line);
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(IrError::Corpus {
                line: line_no,
                message: format!("expected 4 tab-separated columns, found {}", cols.len()),
            });
        }
        if cols[0].is_empty() {
            return Err(IrError::Corpus {
                line: line_no,
                message: "empty formula_id".into(),
            });
        }
        Ok(FormulaRecord {
            formula_id: unescape_field(cols[0]),
            post_id: unescape_field(cols[1]),
            source_text: unescape_field(cols[2]),
            context: unescape_field(cols[3]),
        })
    }

    pub fn to_tsv_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            escape_field(&self.formula_id),
            escape_field(&self.post_id),
            escape_field(&self.source_text),
            escape_field(&self.context)
        )
    }
}

/// Reads every row; blank lines are skipped, duplicate ids rejected.
pub fn read_corpus_tsv<R: BufRead>(r: R) -> Result<Vec<FormulaRecord>, IrError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = FormulaRecord::parse_tsv_line(&line, i + 1)?;
        if !seen.insert(rec.formula_id.clone()) {
            return Err(IrError::Corpus {
                line: i + 1,
                message: format!("duplicate formula_id '{}'", rec.formula_id),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_corpus_tsv<W: Write>(mut w: W, rows: &[FormulaRecord]) -> std::io::Result<()> {
    for r in rows {
        writeln!(w, "{}", r.to_tsv_line())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaped_context_survives_round_trip() {
        let rec = FormulaRecord {
            formula_id: "f1".into(),
            post_id: "p9".into(),
            source_text: "(+ a b)".into(),
            context: "line one\nline\ttwo \\ end".into(),
        };
        let line = rec.to_tsv_line();
        assert_eq!(line.matches('\t').count(), 3);
        assert_eq!(FormulaRecord::parse_tsv_line(&line, 1).unwrap(), rec);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let err = read_corpus_tsv("f1\tp1\t(+ a b)\tctx\nf2\tp2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, IrError::Corpus { line: 2, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = read_corpus_tsv("f1\tp\ta\t\nf1\tp\tb\t\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }
}
