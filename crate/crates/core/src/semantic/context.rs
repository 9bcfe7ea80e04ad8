//! Context windows around a formula.

use serde::{Deserialize, Serialize};

use super::SemanticError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationUnit {
    #[default]
    Chars,
    Words,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Window centred on the formula position.
    #[default]
    Centered,
    /// Leading `max_len` units of the post.
    Prefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextConfig {
    pub max_len: usize,
    pub unit: TruncationUnit,
    pub anchor: Anchor,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            max_len: 1024,
            unit: TruncationUnit::Chars,
            anchor: Anchor::Centered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextText {
    pub formula_id: String,
    pub text: String,
    /// Character offset of the formula start inside `text` (0 for an empty
    /// text, or when a prefix window cut the formula off).
    pub anchor: usize,
}

/// Removes `<tags>` and the math delimiters `$`, `\(`, `\)`, `\[`, `\]`,
/// collapses whitespace to single spaces and trims. Returns the cleaned
/// characters and the cleaned position of byte offset `mark` of `text`.
fn clean(text: &str, mark: usize) -> (Vec<char>, usize) {
    let mut out: Vec<char> = Vec::with_capacity(text.len());
    let mut anchor = None;
    let mut pending_space = false;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        if anchor.is_none() && i >= mark {
            anchor = Some(out.len() + usize::from(pending_space && !out.is_empty()));
        }
        let rest = &text[i..];
        let ch = rest.chars().next().expect("in bounds");
        if ch == '<' {
            if let Some(end) = rest.find('>') {
                // Tags separate words.
                pending_space = true;
                i += end + 1;
                continue;
            }
        }
        if ch == '$' {
            i += 1;
            continue;
        }
        if ch == '\\' && matches!(bytes.get(i + 1), Some(b'(' | b')' | b'[' | b']')) {
            i += 2;
            continue;
        }
        if ch.is_whitespace() {
            pending_space = true;
        } else {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(ch);
        }
        i += ch.len_utf8();
    }
    let anchor = anchor.unwrap_or(out.len()).min(out.len());
    (out, anchor)
}

/// Extracts the context of the formula occupying bytes `span` of `post`.
pub fn extract_context(
    formula_id: &str,
    post: &str,
    span: std::ops::Range<usize>,
    cfg: &ContextConfig,
) -> Result<ContextText, SemanticError> {
    if span.start > span.end
        || span.end > post.len()
        || !post.is_char_boundary(span.start)
        || !post.is_char_boundary(span.end)
    {
        return Err(SemanticError::SpanOutOfRange {
            start: span.start,
            end: span.end,
            len: post.len(),
        });
    }
    let (chars, anchor) = clean(post, span.start);
    let (text, anchor) = match cfg.unit {
        TruncationUnit::Chars => window_chars(&chars, anchor, cfg),
        TruncationUnit::Words => window_words(&chars, anchor, cfg),
    };
    Ok(ContextText {
        formula_id: formula_id.to_string(),
        text,
        anchor,
    })
}

fn window_start(len: usize, anchor: usize, cfg: &ContextConfig) -> usize {
    if len <= cfg.max_len {
        return 0;
    }
    match cfg.anchor {
        Anchor::Prefix => 0,
        Anchor::Centered => anchor.saturating_sub(cfg.max_len / 2).min(len - cfg.max_len),
    }
}

fn window_chars(chars: &[char], anchor: usize, cfg: &ContextConfig) -> (String, usize) {
    let start = window_start(chars.len(), anchor, cfg);
    let end = (start + cfg.max_len).min(chars.len());
    let text: String = chars[start..end].iter().collect();
    let local = anchor.saturating_sub(start).min(end - start);
    (text, local)
}

fn window_words(chars: &[char], anchor: usize, cfg: &ContextConfig) -> (String, usize) {
    let text: String = chars.iter().collect();
    let words: Vec<&str> = text.split(' ').filter(|w| !w.is_empty()).collect();
    // Index of the word containing (or following) the anchor.
    let anchor_word = chars[..anchor].iter().filter(|&&c| c == ' ').count();
    let start = window_start(words.len(), anchor_word, cfg);
    let end = (start + cfg.max_len).min(words.len());
    let kept = words[start..end].join(" ");
    let local_word = anchor_word.saturating_sub(start).min(end - start);
    let local = words[start..start + local_word].iter().map(|w| w.chars().count() + 1).sum();
    (kept, local)
}
