//! Ingested corpus: JSON lines, one formula per line with its operator graph.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use fsearch_core::formula_ir::{FormulaRecord, OpgDump, OpgGraph};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreRecord {
    pub formula_id: String,
    pub post_id: String,
    pub source_text: String,
    pub context: String,
    pub graph: OpgDump,
}

pub struct Store {
    pub records: Vec<FormulaRecord>,
    pub graphs: Vec<OpgGraph>,
}

pub fn write_store(path: &Path, records: &[FormulaRecord], graphs: &[OpgGraph]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for (r, g) in records.iter().zip(graphs) {
        let row = StoreRecord {
            formula_id: r.formula_id.clone(),
            post_id: r.post_id.clone(),
            source_text: r.source_text.clone(),
            context: r.context.clone(),
            graph: g.to_dump(),
        };
        serde_json::to_writer(&mut w, &row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_store(path: &Path) -> Result<Store> {
    let f = File::open(path).with_context(|| format!("opening store {}", path.display()))?;
    let mut records = Vec::new();
    let mut graphs = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: StoreRecord =
            serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        let g = OpgGraph::from_dump(&row.graph).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        records.push(FormulaRecord {
            formula_id: row.formula_id,
            post_id: row.post_id,
            source_text: row.source_text,
            context: row.context,
        });
        graphs.push(g);
    }
    Ok(Store { records, graphs })
}
