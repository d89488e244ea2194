use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::words;
use crate::corpus::PairContext;

/// Third-person pronouns eligible for substitution.
pub const PRONOUNS: &[&str] = &["he", "him", "his", "she", "her", "hers", "they", "them", "their", "it", "its"];

const PLURAL_PRONOUNS: &[&str] = &["they", "them", "their"];

// Capitalized words that start sentences far more often than they name anything.
const NON_ENTITIES: &[&str] = &[
    "i", "i'm", "i've", "i'd", "i'll", "a", "an", "the", "this", "that", "these", "those", "and", "but", "or",
    "so", "if", "when", "what", "why", "how", "who", "where", "which", "we", "you", "is", "are", "was",
    "were", "do", "does", "did", "not", "no", "yes", "my", "your", "our", "there", "here", "then", "also",
    "just", "all", "some", "maybe", "it's", "don't", "can't", "let", "lol", "ok", "well", "now", "in", "on",
    "at", "to", "for", "of", "with", "as", "by", "from", "be", "me", "us", "one",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    /// Byte range of the pronoun in the original child text.
    pub start: usize,
    pub end: usize,
    pub pronoun: String,
    pub antecedent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedText {
    pub comment_id: String,
    pub text: String,
    pub substitutions: Vec<Substitution>,
    pub unresolved: usize,
}

impl ResolvedText {
    pub fn identity(comment_id: &str, text: &str) -> Self {
        ResolvedText { comment_id: comment_id.to_string(), text: text.to_string(), substitutions: Vec::new(), unresolved: 0 }
    }
}

/// Pluggable coreference resolution over a parent/child pair.
pub trait CorefResolver: Send + Sync {
    fn name(&self) -> &str;
    fn resolve(&self, pair: &PairContext<'_>) -> ResolvedText;
}

/// Replaces each third-person pronoun with the nearest preceding candidate
/// antecedent, scanning the child right-to-left and then the parent
/// right-to-left. Candidates are runs of capitalized words or matches of a
/// known-entity list. Plural pronouns only take plural-marked candidates.
#[derive(Debug, Clone, Default)]
pub struct NearestAntecedentResolver {
    /// Lowercase entity names (possibly multi-word) recognized without capitals.
    pub entities: Vec<String>,
    /// Lowercase entity names that count as plural.
    pub plural_entities: Vec<String>,
}

#[derive(Debug, Clone)]
struct Candidate {
    /// Position of the last word of the candidate.
    end_word: usize,
    surface: String,
    plural: bool,
}

impl NearestAntecedentResolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entities(entities: &[&str], plural_entities: &[&str]) -> Self {
        NearestAntecedentResolver {
            entities: entities.iter().map(|s| s.to_lowercase()).collect(),
            plural_entities: plural_entities.iter().map(|s| s.to_lowercase()).collect(),
        }
    }

    fn candidates(&self, text: &str) -> Vec<Candidate> {
        let ws = words(text);
        let pronouns: HashSet<&str> = PRONOUNS.iter().copied().collect();
        let stop: HashSet<&str> = NON_ENTITIES.iter().copied().collect();
        let is_cap = |w: &super::Word| {
            text[w.start..w.end].chars().next().is_some_and(char::is_uppercase)
                && !pronouns.contains(w.lower.as_str())
                && !stop.contains(w.lower.as_str())
        };
        let mut out = Vec::new();
        let mut covered = vec![false; ws.len()];

        // Known entities first, longest match wins.
        let mut known: Vec<(Vec<String>, bool)> = self
            .entities
            .iter()
            .map(|e| (e, false))
            .chain(self.plural_entities.iter().map(|e| (e, true)))
            .map(|(e, p)| (e.split_whitespace().map(str::to_string).collect::<Vec<_>>(), p))
            .filter(|(e, _)| !e.is_empty())
            .collect();
        known.sort_by_key(|(e, _)| std::cmp::Reverse(e.len()));
        let mut i = 0;
        while i < ws.len() {
            let hit = known.iter().find(|(e, _)| {
                i + e.len() <= ws.len() && e.iter().enumerate().all(|(k, t)| ws[i + k].lower == *t)
            });
            if let Some((e, plural)) = hit {
                let last = i + e.len() - 1;
                out.push(Candidate {
                    end_word: last,
                    surface: text[ws[i].start..ws[last].end].to_string(),
                    plural: *plural,
                });
                covered[i..=last].iter_mut().for_each(|c| *c = true);
                i = last + 1;
            } else {
                i += 1;
            }
        }

        // Runs of capitalized words, only joined when adjacent (space-separated).
        let mut i = 0;
        while i < ws.len() {
            if covered[i] || !is_cap(&ws[i]) {
                i += 1;
                continue;
            }
            let mut last = i;
            while last + 1 < ws.len()
                && !covered[last + 1]
                && is_cap(&ws[last + 1])
                && text[ws[last].end..ws[last + 1].start].chars().all(|c| c == ' ')
            {
                last += 1;
            }
            let surface = text[ws[i].start..ws[last].end].to_string();
            let plural = ws[last].lower.ends_with('s');
            out.push(Candidate { end_word: last, surface, plural });
            i = last + 1;
        }
        out.sort_by_key(|c| c.end_word);
        out
    }
}

impl CorefResolver for NearestAntecedentResolver {
    fn name(&self) -> &str {
        "nearest-antecedent-v1"
    }

    fn resolve(&self, pair: &PairContext<'_>) -> ResolvedText {
        let child = pair.child;
        if child.empty_text || child.body.trim().is_empty() {
            return ResolvedText::identity(&child.id, &child.body);
        }
        let text = &child.body;
        let child_words = words(text);
        let child_cands = self.candidates(text);
        let parent_cands = pair
            .parent
            .filter(|p| !p.empty_text)
            .map(|p| self.candidates(&p.body))
            .unwrap_or_default();

        let mut subs = Vec::new();
        let mut unresolved = 0;
        for (wi, w) in child_words.iter().enumerate() {
            if !PRONOUNS.contains(&w.lower.as_str()) {
                continue;
            }
            let plural = PLURAL_PRONOUNS.contains(&w.lower.as_str());
            let ok = |c: &&Candidate| !plural || c.plural;
            let found = child_cands
                .iter()
                .rev()
                .filter(|c| c.end_word < wi)
                .find(ok)
                .or_else(|| parent_cands.iter().rev().find(ok));
            match found {
                Some(c) => subs.push(Substitution {
                    start: w.start,
                    end: w.end,
                    pronoun: text[w.start..w.end].to_string(),
                    antecedent: c.surface.clone(),
                }),
                None => unresolved += 1,
            }
        }

        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for s in &subs {
            out.push_str(&text[last..s.start]);
            out.push_str(&s.antecedent);
            last = s.end;
        }
        out.push_str(&text[last..]);
        ResolvedText { comment_id: child.id.clone(), text: out, substitutions: subs, unresolved }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, CommentKind};

    fn comment(id: &str, body: &str) -> Comment {
        Comment {
            id: id.into(),
            parent_id: None,
            thread_id: "t".into(),
            community: "c".into(),
            author: "a".into(),
            created_at: 0,
            body: body.into(),
            score: 0,
            kind: CommentKind::Post,
            empty_text: false,
        }
    }

    fn run(parent: Option<&str>, child: &str) -> ResolvedText {
        let p = parent.map(|b| comment("p", b));
        let c = comment("c", child);
        NearestAntecedentResolver::new().resolve(&PairContext { parent: p.as_ref(), child: &c })
    }

    #[test]
    fn resolves_within_child() {
        let r = run(None, "HRC is corrupt. She is Evil.");
        assert_eq!(r.text, "HRC is corrupt. HRC is Evil.");
        assert_eq!(r.substitutions.len(), 1);
    }

    #[test]
    fn no_pronouns_is_identity() {
        let r = run(None, "Nothing to see here.");
        assert_eq!(r.text, "Nothing to see here.");
        assert!(r.substitutions.is_empty());
        assert_eq!(r.unresolved, 0);
    }

    #[test]
    fn resolves_from_parent_and_leaves_plural_unresolved() {
        let r = run(Some("Obama gave a speech"), "he lied and they cheered him");
        assert_eq!(r.text, "Obama lied and they cheered Obama");
        assert_eq!(r.unresolved, 1);
    }

    #[test]
    fn plural_pronoun_takes_plural_candidate() {
        let r = run(Some("The Patriots are in control"), "they know");
        assert_eq!(r.text, "Patriots know");
    }

    #[test]
    fn known_entities_match_lowercase() {
        let res = NearestAntecedentResolver::with_entities(&["hillary"], &["white hats"]);
        let c = comment("c", "hillary lied. she always does. white hats know, they said so");
        let r = res.resolve(&PairContext { parent: None, child: &c });
        assert_eq!(r.text, "hillary lied. hillary always does. white hats know, white hats said so");
    }

    #[test]
    fn idempotent_on_examples() {
        for (p, c) in [
            (None, "HRC is corrupt. She is Evil."),
            (Some("Obama gave a speech"), "he lied and they cheered him"),
        ] {
            let once = run(p, c);
            let twice = run(p, &once.text);
            assert_eq!(once.text, twice.text);
        }
    }
}
