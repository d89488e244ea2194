//! Dimension-tagged phrase lexicons and the interactive expansion session.
//!
//! A seed lexicon grows into a canon by repeatedly asking for phrases close
//! to the lexicon in embedding space and letting a human accept or reject
//! them. Every decision is appended to an event log; replaying the log
//! against the seed reproduces the final lexicon exactly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::textprep::{normalize_phrase, PhraseSequence, PhraseVocab, JOIN};

pub const DEFAULT_DIMENSIONS: [&str; 5] = ["movement", "expectations", "practices", "heroes", "foes"];

const LEXICON_MAGIC: &str = "#canonlab-lexicon v1";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Accepted { session: String, query: Option<String>, rank: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub dimensions: BTreeSet<String>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    /// Normalized phrase (space separated) to entry.
    entries: BTreeMap<String, LexiconEntry>,
}

/// Vocabulary form of a normalized phrase.
pub fn vocab_form(phrase: &str) -> String {
    normalize_phrase(phrase).replace(' ', &JOIN.to_string())
}

/// Canonical tag used in reports for a dimension name.
pub fn dimension_tag(dimension: &str) -> String {
    match dimension {
        "heroes" => "HERO".into(),
        "foes" => "FOE".into(),
        "movement" => "MMT".into(),
        "expectations" => "EXPT".into(),
        "practices" => "PRCT".into(),
        other => other.to_uppercase(),
    }
}

fn format_provenance(p: &Provenance) -> String {
    match p {
        Provenance::Seed => "seed".into(),
        Provenance::Accepted { session, query, rank } => format!(
            "accepted\t{session}\t{}\t{}",
            query.as_deref().unwrap_or("-"),
            rank.map_or("-".to_string(), |r| r.to_string())
        ),
    }
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, phrase: &str) -> bool {
        self.entries.contains_key(&normalize_phrase(phrase))
    }

    pub fn get(&self, phrase: &str) -> Option<&LexiconEntry> {
        self.entries.get(&normalize_phrase(phrase))
    }

    /// Entries in phrase order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(p, e)| (p.as_str(), e))
    }

    pub fn phrases(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn dimensions(&self) -> BTreeSet<&str> {
        self.entries.values().flat_map(|e| e.dimensions.iter().map(String::as_str)).collect()
    }

    pub fn dimension(&self, name: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(_, e)| e.dimensions.contains(name))
            .map(|(p, _)| p.as_str())
            .collect()
    }

    /// Insert a phrase. Returns false (and leaves the lexicon untouched) when
    /// the phrase is already a member.
    pub fn insert(&mut self, phrase: &str, dimensions: &[String], provenance: Provenance) -> Result<bool> {
        let key = normalize_phrase(phrase);
        if key.is_empty() {
            return Err(Error::invalid("empty phrase"));
        }
        let dims: BTreeSet<String> = dimensions.iter().map(|d| d.trim().to_lowercase()).collect();
        if dims.is_empty() || dims.iter().any(String::is_empty) {
            return Err(Error::invalid(format!("phrase {key:?} needs at least one non-empty dimension")));
        }
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, LexiconEntry { dimensions: dims, provenance });
        Ok(true)
    }

    /// Parse a seed or canon file: `dimension[,dimension...]<TAB>phrase[<TAB>provenance...]`.
    ///
    /// A phrase may appear on several rows only with the same dimensions.
    pub fn read<R: BufRead>(reader: R) -> Result<Lexicon> {
        let mut lex = Lexicon::new();
        let mut conflicts = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(Error::Parse { line: n + 1, message: "expected dimension<TAB>phrase".into() });
            }
            let dims: Vec<String> = fields[0].split(',').map(|d| d.trim().to_lowercase()).collect();
            let provenance = match fields.get(2).copied() {
                None | Some("seed") => Provenance::Seed,
                Some("accepted") if fields.len() == 6 => Provenance::Accepted {
                    session: fields[3].to_string(),
                    query: (fields[4] != "-").then(|| fields[4].to_string()),
                    rank: if fields[5] == "-" {
                        None
                    } else {
                        Some(fields[5].parse().map_err(|_| Error::Parse { line: n + 1, message: "bad rank".into() })?)
                    },
                },
                Some(other) => {
                    return Err(Error::Parse { line: n + 1, message: format!("bad provenance {other:?}") })
                }
            };
            let key = normalize_phrase(fields[1]);
            if let Some(existing) = lex.entries.get(&key) {
                let dset: BTreeSet<String> = dims.iter().cloned().collect();
                if existing.dimensions != dset {
                    conflicts.push(format!(
                        "{key} (line {}): {:?} vs {:?}",
                        n + 1,
                        existing.dimensions,
                        dset
                    ));
                }
                continue;
            }
            lex.insert(&key, &dims, provenance).map_err(|e| Error::Parse { line: n + 1, message: e.to_string() })?;
        }
        if !conflicts.is_empty() {
            return Err(Error::invalid(format!("conflicting dimensions: {}", conflicts.join("; "))));
        }
        if lex.is_empty() {
            return Err(Error::invalid("lexicon file has no entries"));
        }
        Ok(lex)
    }

    /// Versioned canon file with one record per phrase.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{LEXICON_MAGIC}")?;
        for (p, e) in &self.entries {
            let dims: Vec<&str> = e.dimensions.iter().map(String::as_str).collect();
            writeln!(w, "{}\t{}\t{}", dims.join(","), p, format_provenance(&e.provenance))?;
        }
        Ok(())
    }
}

/// Up to `per_phrase` comment ids per vocabulary phrase, smallest ids first.
#[derive(Debug, Clone, Default)]
pub struct EvidenceIndex {
    by_phrase: HashMap<u32, Vec<String>>,
}

impl EvidenceIndex {
    pub fn build(sequences: &[PhraseSequence], vocab: &PhraseVocab, per_phrase: usize) -> Self {
        let mut by_phrase: HashMap<u32, BTreeSet<&str>> = HashMap::new();
        for seq in sequences {
            for id in seq.ids(vocab).into_iter().flatten() {
                let set = by_phrase.entry(id).or_default();
                set.insert(&seq.comment_id);
                if set.len() > per_phrase {
                    let last = *set.iter().next_back().expect("non-empty");
                    set.remove(last);
                }
            }
        }
        EvidenceIndex {
            by_phrase: by_phrase
                .into_iter()
                .map(|(k, v)| (k, v.into_iter().map(str::to_string).collect()))
                .collect(),
        }
    }

    pub fn get(&self, id: u32) -> &[String] {
        self.by_phrase.get(&id).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    /// Vocabulary form of the phrase.
    pub phrase: String,
    pub score: f64,
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuggestResult {
    Suggestions { query: Option<String>, items: Vec<Suggestion> },
    DidYouMean { query: String, candidates: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum LexiconEvent {
    Accept { phrase: String, dimensions: Vec<String>, query: Option<String>, rank: Option<usize> },
    Reject { phrase: String },
}

/// Read-only artifacts an expansion session ranks against.
#[derive(Clone, Copy)]
pub struct SuggestContext<'a> {
    pub vocab: &'a PhraseVocab,
    pub table: &'a EmbeddingTable,
    pub evidence: &'a EvidenceIndex,
}

#[derive(Debug, Clone)]
pub struct ExpansionSession {
    pub id: String,
    seed: Lexicon,
    lexicon: Lexicon,
    log: Vec<LexiconEvent>,
    rejected: BTreeSet<String>,
    cached: Option<(usize, Vec<Suggestion>)>,
    last: Option<(Option<String>, Vec<Suggestion>)>,
}

impl ExpansionSession {
    pub fn new(id: impl Into<String>, seed: Lexicon) -> Self {
        ExpansionSession {
            id: id.into(),
            lexicon: seed.clone(),
            seed,
            log: Vec::new(),
            rejected: BTreeSet::new(),
            cached: None,
            last: None,
        }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn log(&self) -> &[LexiconEvent] {
        &self.log
    }

    pub fn rejected(&self) -> &BTreeSet<String> {
        &self.rejected
    }

    fn excluded(&self, vocab: &PhraseVocab) -> HashSet<u32> {
        self.lexicon
            .phrases()
            .map(vocab_form)
            .chain(self.rejected.iter().cloned())
            .filter_map(|p| vocab.id(&p))
            .collect()
    }

    fn member_ids(&self, vocab: &PhraseVocab) -> Vec<u32> {
        let mut ids: Vec<u32> = self.lexicon.phrases().filter_map(|p| vocab.id(&vocab_form(p))).collect();
        ids.sort_unstable();
        ids
    }

    /// Ranked suggestions. With a query: its nearest non-member neighbors.
    /// Without: phrases near any lexicon member, scored by the maximum
    /// cosine to the lexicon.
    pub fn suggest(&mut self, ctx: SuggestContext<'_>, query: Option<&str>, n: usize) -> SuggestResult {
        let excluded = self.excluded(ctx.vocab);
        let make = |id: u32, score: f64| Suggestion {
            phrase: ctx.vocab.phrase(id).to_string(),
            score,
            evidence: ctx.evidence.get(id).to_vec(),
        };
        let result = match query {
            Some(q) => {
                let form = vocab_form(q);
                let Some(qid) = ctx.vocab.id(&form).filter(|&i| (i as usize) < ctx.table.len()) else {
                    return SuggestResult::DidYouMean { query: q.to_string(), candidates: ctx.vocab.fuzzy(&form, 5) };
                };
                let items: Vec<Suggestion> = ctx
                    .table
                    .neighbors(qid, ctx.table.len())
                    .into_iter()
                    .filter(|nb| !excluded.contains(&nb.id))
                    .take(n)
                    .map(|nb| make(nb.id, nb.cosine))
                    .collect();
                self.last = Some((Some(form.clone()), items.clone()));
                return SuggestResult::Suggestions { query: Some(form), items };
            }
            None => {
                if let Some((cached_n, items)) = &self.cached {
                    if *cached_n == n {
                        let items = items.clone();
                        self.last = Some((None, items.clone()));
                        return SuggestResult::Suggestions { query: None, items };
                    }
                }
                let members = self.member_ids(ctx.vocab);
                let mut pool: BTreeSet<u32> = BTreeSet::new();
                for &m in &members {
                    pool.extend(
                        ctx.table
                            .neighbors(m, ctx.table.len())
                            .into_iter()
                            .filter(|nb| !excluded.contains(&nb.id))
                            .take(n)
                            .map(|nb| nb.id),
                    );
                }
                let mut scored: Vec<(u32, f64)> = pool
                    .into_iter()
                    .map(|id| {
                        let best = members.iter().map(|&m| ctx.table.cosine(id, m)).fold(f64::NEG_INFINITY, f64::max);
                        (id, best)
                    })
                    .collect();
                scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let items: Vec<Suggestion> = scored.into_iter().take(n).map(|(id, s)| make(id, s)).collect();
                self.cached = Some((n, items.clone()));
                items
            }
        };
        self.last = Some((None, result.clone()));
        SuggestResult::Suggestions { query: None, items: result }
    }

    /// Add a phrase to the lexicon. Returns false when it was already a member.
    pub fn accept(&mut self, vocab: &PhraseVocab, phrase: &str, dimensions: &[String]) -> Result<bool> {
        let form = vocab_form(phrase);
        if vocab.id(&form).is_none() {
            return Err(Error::UnknownPhrase { phrase: phrase.to_string(), candidates: vocab.fuzzy(&form, 5) });
        }
        let (query, rank) = match &self.last {
            Some((q, items)) => (q.clone(), items.iter().position(|s| s.phrase == form).map(|r| r + 1)),
            None => (None, None),
        };
        let event = LexiconEvent::Accept { phrase: form, dimensions: dimensions.to_vec(), query, rank };
        self.apply(&event)
    }

    pub fn reject(&mut self, vocab: &PhraseVocab, phrase: &str) -> Result<()> {
        let form = vocab_form(phrase);
        if vocab.id(&form).is_none() {
            return Err(Error::UnknownPhrase { phrase: phrase.to_string(), candidates: vocab.fuzzy(&form, 5) });
        }
        self.apply(&LexiconEvent::Reject { phrase: form })?;
        Ok(())
    }

    /// Apply one logged event. Only state-changing events are appended.
    pub fn apply(&mut self, event: &LexiconEvent) -> Result<bool> {
        let changed = match event {
            LexiconEvent::Accept { phrase, dimensions, query, rank } => {
                let prov = Provenance::Accepted { session: self.id.clone(), query: query.clone(), rank: *rank };
                let inserted = self.lexicon.insert(phrase, dimensions, prov)?;
                if !inserted {
                    warn!("phrase {phrase:?} is already in the lexicon");
                }
                inserted
            }
            LexiconEvent::Reject { phrase } => self.rejected.insert(phrase.clone()),
        };
        if changed {
            self.log.push(event.clone());
            self.cached = None;
        }
        Ok(changed)
    }

    /// Rebuild a session from a seed and an event log.
    pub fn replay(id: impl Into<String>, seed: Lexicon, events: &[LexiconEvent]) -> Result<Self> {
        let mut s = ExpansionSession::new(id, seed);
        for e in events {
            s.apply(e)?;
        }
        Ok(s)
    }

    pub fn seed(&self) -> &Lexicon {
        &self.seed
    }
}
