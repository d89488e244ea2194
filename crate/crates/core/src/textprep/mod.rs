//! Coreference substitution, normalization and collocation-aware tokenization.

mod coref;
mod phrases;

pub use coref::{CorefResolver, NearestAntecedentResolver, ResolvedText, Substitution, PRONOUNS};
pub use phrases::{tokenize, MergeRule, PhraseSequence, PhraseVocab, VocabConfig, JOIN};

use crate::corpus::{build_trees, pairs, Corpus};
use crate::error::Result;

/// Resolve every comment against its parent, in corpus order. Comments
/// flagged `empty_text` resolve to the empty string.
pub fn resolve_corpus(corpus: &Corpus, resolver: &dyn CorefResolver) -> Result<Vec<ResolvedText>> {
    let forest = build_trees(corpus)?;
    let mut out: Vec<Option<ResolvedText>> = vec![None; corpus.len()];
    for tree in forest.all() {
        for pair in pairs(tree, corpus)? {
            let c = pair.child;
            let r = if c.empty_text { ResolvedText::identity(&c.id, "") } else { resolver.resolve(&pair) };
            if let Some(pos) = corpus.position(&c.id) {
                out[pos] = Some(r);
            }
        }
    }
    Ok(out
        .into_iter()
        .zip(corpus.comments())
        .map(|(r, c)| r.unwrap_or_else(|| ResolvedText::identity(&c.id, if c.empty_text { "" } else { &c.body })))
        .collect())
}

/// A word occurrence in the original text, with byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub start: usize,
    pub end: usize,
    pub lower: String,
}

fn is_url_start(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://") || s.starts_with("www.")
}

/// Byte ranges covered by URLs (from a URL prefix to the next whitespace).
fn url_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let rest = &text[i..];
        if is_url_start(rest) {
            let end = rest.find(char::is_whitespace).map_or(text.len(), |e| i + e);
            out.push((i, end));
            i = end;
        } else {
            i += rest.chars().next().map_or(1, char::len_utf8);
        }
    }
    out
}

/// Split text into lowercase words: runs of alphanumeric characters with
/// internal apostrophes. URLs, markup punctuation and HTML entities are
/// skipped.
pub fn words(text: &str) -> Vec<Word> {
    let urls = url_ranges(text);
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let bytes_end = text.len();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut k = 0;
    let mut url_idx = 0;
    while k <= chars.len() {
        let (pos, ch) = if k < chars.len() { chars[k] } else { (bytes_end, ' ') };
        while url_idx < urls.len() && urls[url_idx].1 <= pos {
            url_idx += 1;
        }
        let in_url = url_idx < urls.len() && urls[url_idx].0 <= pos && pos < urls[url_idx].1;
        // HTML entities such as &amp; are dropped wholesale.
        if start.is_none() && ch == '&' {
            if let Some(semi) = text[pos..].find(';').filter(|&s| s <= 8 && s > 1) {
                let name = &text[pos + 1..pos + semi];
                if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '#') {
                    while k < chars.len() && chars[k].0 <= pos + semi {
                        k += 1;
                    }
                    continue;
                }
            }
        }
        let wordish = !in_url && ch.is_alphanumeric();
        let apostrophe = !in_url
            && (ch == '\'' || ch == '\u{2019}')
            && start.is_some()
            && chars.get(k + 1).is_some_and(|&(_, c)| c.is_alphanumeric());
        match (start, wordish || apostrophe) {
            (None, true) if wordish => start = Some(pos),
            (Some(s), false) => {
                let lower = text[s..pos].to_lowercase().replace('\u{2019}', "'");
                out.push(Word { start: s, end: pos, lower });
                start = None;
            }
            _ => {}
        }
        k += 1;
    }
    out
}

/// Lowercase word tokens of a text.
pub fn word_tokens(text: &str) -> Vec<String> {
    words(text).into_iter().map(|w| w.lower).collect()
}

/// Normalize a phrase for lexicon matching: lowercase, with `_`, `-` and
/// whitespace treated as the same separator.
pub fn normalize_phrase(phrase: &str) -> String {
    phrase
        .to_lowercase()
        .split(|c: char| c == '_' || c == '-' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Split a text into sentences on terminal punctuation.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?' | '\n') {
            // keep runs like "?!" or "..." together
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = chars.peek() {
                if matches!(d, '.' | '!' | '?') {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let s = text[start..end].trim();
            if s.chars().any(char::is_alphanumeric) {
                out.push(s);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if tail.chars().any(char::is_alphanumeric) {
        out.push(tail);
    }
    out
}
