//! Formula intermediate representations: operator trees (OPT), their
//! shared-subtree operator graphs (OPG), and the corpus row format.

mod corpus;
mod latex;
mod opg;
mod opt;
mod sexpr;

use thiserror::Error;

pub use corpus::{escape_field, read_corpus_tsv, unescape_field, write_corpus_tsv, FormulaRecord};
pub use latex::parse_latex_subset;
pub use opg::{opt_to_opg, OpgDump, OpgEdge, OpgGraph, OpgStats};
pub use opt::{NodeKind, OptNode, OptTree};
pub use sexpr::parse_opt_sexpr;

#[derive(Debug, Error)]
pub enum IrError {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported construct '{token}' at byte {offset}")]
    Unsupported { token: String, offset: usize },
    #[error("invalid operator tree: {0}")]
    InvalidTree(String),
    #[error("invalid operator graph: {0}")]
    InvalidGraph(String),
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IrError {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        IrError::Parse {
            offset,
            message: message.into(),
        }
    }
}

/// Parses a formula given either as an s-expression or in the LaTeX subset.
///
/// The s-expression reader is tried first; if it fails the LaTeX front-end
/// is used, and if both fail the LaTeX error is returned unless the input
/// begins with `(` followed by a non-delimiter (s-expression shaped).
pub fn parse_formula(src: &str) -> Result<OptTree, IrError> {
    match parse_opt_sexpr(src) {
        Ok(t) => Ok(t),
        Err(sexpr_err) => match parse_latex_subset(src) {
            Ok(t) => Ok(t),
            Err(latex_err) => {
                if looks_like_sexpr(src) {
                    Err(sexpr_err)
                } else {
                    Err(latex_err)
                }
            }
        },
    }
}

fn looks_like_sexpr(src: &str) -> bool {
    let mut it = src.trim_start().chars();
    it.next() == Some('(') && it.next().is_some_and(|c| !c.is_whitespace() && c != '(' && c != ')')
        && src.contains(' ')
}
