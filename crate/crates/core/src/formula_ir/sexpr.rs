//! Prefix s-expression reader for operator trees, e.g.
//! `(= (+ (/ 1 (- a b)) (^ (- a b) 2)) 1)`.
//!
//! The head of each list is the operator; atoms are operands. Atoms are
//! maximal runs of non-whitespace characters other than parentheses.

use super::opt::{OptTree, TreeBuilder};
use super::IrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn tokenize(src: &str) -> Vec<(usize, Tok<'_>)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in src.char_indices() {
        let delim = ch == '(' || ch == ')' || ch.is_whitespace();
        if delim {
            if let Some(s) = start.take() {
                out.push((s, Tok::Atom(&src[s..i])));
            }
            match ch {
                '(' => out.push((i, Tok::Open)),
                ')' => out.push((i, Tok::Close)),
                _ => {}
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, Tok::Atom(&src[s..])));
    }
    out
}

/// Parses one s-expression. Trailing input after the expression is an error.
pub fn parse_opt_sexpr(src: &str) -> Result<OptTree, IrError> {
    let toks = tokenize(src);
    if toks.is_empty() {
        return Err(IrError::parse(src.len(), "empty input"));
    }
    let mut b = TreeBuilder::default();
    // Each frame: (offset of '(', head label, child ids).
    let mut stack: Vec<(usize, Option<String>, Vec<usize>)> = Vec::new();
    let mut root = None;
    for &(off, tok) in &toks {
        if root.is_some() {
            return Err(IrError::parse(off, "trailing input after expression"));
        }
        match tok {
            Tok::Open => stack.push((off, None, Vec::new())),
            Tok::Atom(a) => match stack.last_mut() {
                None => root = Some(b.push(a.to_string(), Vec::new())),
                Some((_, head @ None, _)) => *head = Some(a.to_string()),
                Some((_, Some(_), kids)) => kids.push(b.push(a.to_string(), Vec::new())),
            },
            Tok::Close => {
                let Some((open, head, kids)) = stack.pop() else {
                    return Err(IrError::parse(off, "unbalanced ')'"));
                };
                let Some(head) = head else {
                    return Err(IrError::parse(open, "empty list"));
                };
                if kids.is_empty() {
                    return Err(IrError::parse(open, format!("operator '{head}' has no operands")));
                }
                let id = b.push(head, kids);
                match stack.last_mut() {
                    None => root = Some(id),
                    Some((_, None, _)) => {
                        return Err(IrError::parse(off, "list in operator position"));
                    }
                    Some((_, Some(_), kids)) => kids.push(id),
                }
            }
        }
    }
    if !stack.is_empty() {
        return Err(IrError::parse(src.len(), "unbalanced '(' at end of input"));
    }
    let root = root.expect("non-empty token stream yields a root");
    Ok(b.finish(root))
}
