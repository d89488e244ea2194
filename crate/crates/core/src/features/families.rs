use std::collections::HashMap;

use super::lists::{parse_lists, CueLists, PatternList};
use crate::corpus::Comment;
use crate::lexicon::Lexicon;
use crate::textprep::{sentences, PhraseSequence, JOIN};

/// Canon phrases as word sequences, indexed by first word.
#[derive(Debug, Clone)]
pub struct CanonIndex {
    pub phrases: Vec<String>,
    words: Vec<Vec<String>>,
    by_first: HashMap<String, Vec<usize>>,
}

impl CanonIndex {
    pub fn new(canon: &Lexicon) -> Self {
        Self::from_phrases(canon.phrases())
    }

    pub fn from_phrases<'a>(phrases: impl IntoIterator<Item = &'a str>) -> Self {
        let phrases: Vec<String> = phrases.into_iter().map(str::to_string).collect();
        let words: Vec<Vec<String>> =
            phrases.iter().map(|p| p.split(' ').map(str::to_string).collect()).collect();
        let mut by_first: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, w) in words.iter().enumerate() {
            by_first.entry(w[0].clone()).or_default().push(i);
        }
        CanonIndex { phrases, words, by_first }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonCounts {
    /// Occurrences per 100 tokens.
    pub rates: Vec<f64>,
    pub raw: Vec<u32>,
}

/// Count canon phrases in a phrase sequence. A phrase matches a run of whole
/// tokens whose words spell it exactly; there is no stemming or expansion.
pub fn canon_counts(seq: &PhraseSequence, canon: &CanonIndex) -> CanonCounts {
    let token_words: Vec<Vec<&str>> = seq.tokens.iter().map(|t| t.split(JOIN).collect()).collect();
    let mut raw = vec![0u32; canon.len()];
    for i in 0..token_words.len() {
        let Some(cands) = canon.by_first.get(token_words[i][0]) else { continue };
        for &c in cands {
            let target = &canon.words[c];
            let mut k = 0;
            let mut j = i;
            let mut ok = true;
            while k < target.len() && ok {
                let Some(tw) = token_words.get(j) else {
                    ok = false;
                    break;
                };
                for w in tw {
                    if k >= target.len() || target[k] != *w {
                        ok = false;
                        break;
                    }
                    k += 1;
                }
                j += 1;
            }
            if ok && k == target.len() {
                raw[c] += 1;
            }
        }
    }
    let n = seq.tokens.len();
    let rates = raw.iter().map(|&r| if n == 0 { 0.0 } else { 100.0 * r as f64 / n as f64 }).collect();
    CanonCounts { rates, raw }
}

/// Per-100-word rates for each category, in file order.
pub fn category_counts(words: &[&str], lists: &[PatternList]) -> Vec<f64> {
    lists.iter().map(|l| l.rate(words)).collect()
}

/// Integrative complexity scorer. Implementations must return a value in [1, 7].
pub trait IcScorer: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, text: &str) -> f64;
}

/// Connective-rate proxy for integrative complexity:
/// `1 + 3 min(1, d) + 3 min(1, g) [d > 0]` with `d`, `g` the per-sentence
/// rates of differentiation and integration connectives.
#[derive(Debug, Clone)]
pub struct ConnectiveIc {
    pub differentiation: PatternList,
    pub integration: PatternList,
}

impl Default for ConnectiveIc {
    fn default() -> Self {
        let mut lists = parse_lists(
            "differentiation: but however although on_the_other_hand\n\
             integration: therefore thus overall taken_together\n",
        )
        .expect("built-in connectives parse");
        let integration = lists.pop().expect("two lists");
        let differentiation = lists.pop().expect("two lists");
        ConnectiveIc { differentiation, integration }
    }
}

impl IcScorer for ConnectiveIc {
    fn name(&self) -> &str {
        "connective-rate-v1"
    }

    fn score(&self, text: &str) -> f64 {
        let n_sent = sentences(text).len();
        if n_sent == 0 {
            return 1.0;
        }
        let lower = crate::textprep::word_tokens(text);
        let words: Vec<&str> = lower.iter().map(String::as_str).collect();
        let d = self.differentiation.count(&words) as f64 / n_sent as f64;
        let g = self.integration.count(&words) as f64 / n_sent as f64;
        let gated = if d > 0.0 { 3.0 * g.min(1.0) } else { 0.0 };
        (1.0 + 3.0 * d.min(1.0) + gated).clamp(1.0, 7.0)
    }
}

/// Booster, hedge, modal and evidential rates; positive and negative valence
/// proportions; quotation count; question count.
pub fn credibility_cues(text: &str, words: &[&str], cues: &CueLists) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (slot, list) in out.iter_mut().zip(&cues.lists) {
        *slot = list.rate(words);
    }
    let (mut pos, mut neg, mut neutral) = (0.0, 0.0, 0.0);
    for w in words {
        match cues.valence.get(*w) {
            Some(&v) if v > 0.0 => pos += v,
            Some(&v) if v < 0.0 => neg -= v,
            _ => neutral += 1.0,
        }
    }
    let total = pos + neg + neutral;
    if total > 0.0 {
        out[4] = pos / total;
        out[5] = neg / total;
    }
    out[6] = quotation_count(text) as f64;
    out[7] = question_count(text) as f64;
    out
}

/// Paired straight or curly quotes plus blockquote lines.
pub fn quotation_count(text: &str) -> usize {
    let straight = text.matches('"').count() / 2;
    let curly = text.matches('\u{201c}').count().min(text.matches('\u{201d}').count());
    let block = text
        .lines()
        .filter(|l| {
            let t = l.trim_start();
            t.starts_with('>') || t.starts_with("&gt;")
        })
        .count();
    straight + curly + block
}

pub fn question_count(text: &str) -> usize {
    sentences(text)
        .iter()
        .filter(|s| s.trim_end().chars().rev().take_while(|c| matches!(c, '.' | '!' | '?')).any(|c| c == '?'))
        .count()
}

/// `(score, score - parent score)`; the second slot is 0 at roots. The flag
/// reports a missing parent.
pub fn feedback(comment: &Comment, parent: Option<&Comment>) -> ([f64; 2], bool) {
    match parent {
        Some(p) => ([comment.score as f64, (comment.score - p.score) as f64], false),
        None => ([comment.score as f64, 0.0], true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CommentKind;

    fn seq(tokens: &[&str]) -> PhraseSequence {
        PhraseSequence { comment_id: "c".into(), tokens: tokens.iter().map(|t| t.to_string()).collect() }
    }

    #[test]
    fn canon_rates_per_hundred_tokens() {
        let idx = CanonIndex::from_phrases(["patriots", "wwg1wga"]);
        let c = canon_counts(&seq(&["wwg1wga", "patriots", "wwg1wga"]), &idx);
        assert!((c.rates[1] - 200.0 / 3.0).abs() < 1e-12);
        assert!((c.rates[0] - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.raw, vec![1, 2]);
    }

    #[test]
    fn canon_is_surface_form() {
        let idx = CanonIndex::from_phrases(["wwg1wga"]);
        let c = canon_counts(&seq(&["where", "we", "go", "one", "we", "go", "all"]), &idx);
        assert_eq!(c.raw, vec![0]);
        assert_eq!(canon_counts(&seq(&[]), &idx).rates, vec![0.0]);
    }

    #[test]
    fn canon_spans_tokens_at_boundaries() {
        let idx = CanonIndex::from_phrases(["white hats", "hats"]);
        assert_eq!(canon_counts(&seq(&["white", "hats"]), &idx).raw, vec![1, 1]);
        assert_eq!(canon_counts(&seq(&["white_hats"]), &idx).raw, vec![1, 0]);
        assert_eq!(canon_counts(&seq(&["white_hats_rule"]), &idx).raw, vec![0, 0]);
    }

    #[test]
    fn ic_examples() {
        let ic = ConnectiveIc::default();
        assert_eq!(ic.score(""), 1.0);
        assert_eq!(ic.score("I like Q."), 1.0);
        let both = ic.score("I trust Q but the arrests failed; therefore I weigh both.");
        assert_eq!(both, 7.0);
        // integration without differentiation does not count
        assert_eq!(ic.score("Therefore it is so."), 1.0);
        assert_eq!(ic.score("But no. Fine. Ok. Sure."), 1.75);
    }

    #[test]
    fn credibility_examples() {
        let cues = CueLists::builtin();
        let t = "Is this true?";
        let w = ["is", "this", "true"];
        assert_eq!(credibility_cues(t, &w, &cues)[7], 1.0);
        let w = ["actually", "evidently"];
        assert_eq!(credibility_cues("actually, evidently", &w, &cues)[0], 100.0);
        let w = ["the", "table", "has", "four", "legs"];
        let c = credibility_cues("The table has four legs.", &w, &cues);
        assert_eq!((c[4], c[5]), (0.0, 0.0));
    }

    #[test]
    fn quotes_and_blockquotes() {
        assert_eq!(quotation_count("he said \"no\" and \"yes\""), 2);
        assert_eq!(quotation_count("> quoted\nreply\n&gt; again"), 2);
        assert_eq!(quotation_count("a \" stray"), 0);
    }

    fn comment(score: i64) -> Comment {
        Comment {
            id: "x".into(),
            parent_id: None,
            thread_id: "t".into(),
            community: "c".into(),
            author: "a".into(),
            created_at: 0,
            body: String::new(),
            score,
            kind: CommentKind::Comment,
            empty_text: false,
        }
    }

    #[test]
    fn feedback_examples() {
        assert_eq!(feedback(&comment(5), Some(&comment(3))), ([5.0, 2.0], false));
        assert_eq!(feedback(&comment(7), None), ([7.0, 0.0], true));
        assert_eq!(feedback(&comment(-2), Some(&comment(10))).0, [-2.0, -12.0]);
    }
}
