//! Whitespace tokenization that keeps byte spans, so a single token can be
//! rewritten without disturbing the rest of the text.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// The mask literal used at the artifact boundary.
pub const MASK: &str = "[MASK]";

/// Byte spans of whitespace-delimited tokens.
pub fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

pub fn tokens(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Byte range of the token's core: the token minus leading and trailing
/// characters that are neither alphanumeric nor an apostrophe.
pub fn core_range(token: &str) -> (usize, usize) {
    let is_core = |c: char| c.is_alphanumeric() || c == '\'';
    let start = token
        .char_indices()
        .find(|&(_, c)| is_core(c))
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let end = token
        .char_indices()
        .rev()
        .find(|&(_, c)| is_core(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(start);
    let core = &token[start..end.max(start)];
    // apostrophes only count inside a word
    let trimmed_start = core.len() - core.trim_start_matches('\'').len();
    let trimmed_end = core.trim_end_matches('\'').len();
    if trimmed_start >= trimmed_end {
        return (start, start);
    }
    (start + trimmed_start, start + trimmed_end)
}

pub fn token_core(token: &str) -> &str {
    let (s, e) = core_range(token);
    &token[s..e]
}

/// A core made only of letters.
pub fn is_alpha_word(core: &str) -> bool {
    !core.is_empty() && core.chars().all(|c| c.is_alphabetic())
}

/// Replaces the core of token `index`, keeping its surrounding punctuation and
/// every other byte of `text`. Returns `None` when the index is out of range
/// or the token has no core.
pub fn replace_token_core(text: &str, index: usize, replacement: &str) -> Option<String> {
    let (start, end) = *token_spans(text).get(index)?;
    let token = &text[start..end];
    let (cs, ce) = core_range(token);
    if cs == ce {
        return None;
    }
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..start + cs]);
    out.push_str(replacement);
    out.push_str(&text[start + ce..]);
    Some(out)
}

/// Replaces the whole token `index`.
pub fn replace_token(text: &str, index: usize, replacement: &str) -> Option<String> {
    let (start, end) = *token_spans(text).get(index)?;
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..start]);
    out.push_str(replacement);
    out.push_str(&text[end..]);
    Some(out)
}

/// Text with token `index` removed, whitespace collapsed around the gap.
pub fn delete_token(text: &str, index: usize) -> Option<String> {
    let toks = tokens(text);
    if index >= toks.len() {
        return None;
    }
    let kept: Vec<&str> = toks
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != index)
        .map(|(_, t)| *t)
        .collect();
    Some(kept.join(" "))
}

/// Lowercased non-empty token cores; used for order-preservation checks.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .flat_map(|t| t.split(',').collect::<Vec<_>>())
        .map(token_core)
        .filter(|c| !c.is_empty())
        .map(|c| c.to_lowercase())
        .collect()
}

/// Whether `needle` appears in order (not necessarily contiguously) in `haystack`.
pub fn is_subsequence<T: PartialEq>(needle: &[T], haystack: &[T]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Positions where two token sequences differ, or `None` if lengths differ.
pub fn differing_positions(a: &str, b: &str) -> Option<Vec<usize>> {
    let ta = tokens(a);
    let tb = tokens(b);
    if ta.len() != tb.len() {
        return None;
    }
    Some(
        ta.iter()
            .zip(&tb)
            .enumerate()
            .filter(|(_, (x, y))| x != y)
            .map(|(i, _)| i)
            .collect(),
    )
}

pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Applies the source word's casing (all-caps or leading capital) to `word`.
pub fn match_case(source: &str, word: &str) -> String {
    let letters: Vec<char> = source.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        word.to_uppercase()
    } else if letters.first().is_some_and(|c| c.is_uppercase()) {
        capitalize(word)
    } else {
        word.to_string()
    }
}
