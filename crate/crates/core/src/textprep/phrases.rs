use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::word_tokens;
use crate::error::{Error, Result};

/// Join character for merged phrases.
pub const JOIN: char = '_';

const VOCAB_MAGIC: &str = "#canonlab-vocab";
const VOCAB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VocabConfig {
    pub min_count: u64,
    pub score_threshold: f64,
    /// Discount subtracted from pair counts before scoring.
    pub delta: f64,
    /// Unigrams below this frequency stay out of the phrase list.
    pub min_unigram_count: u64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig { min_count: 25, score_threshold: 10.0, delta: 5.0, min_unigram_count: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRule {
    pub left: String,
    pub right: String,
    pub score: f64,
    pub count: u64,
    /// 1 for bigrams, 2 for trigrams.
    pub pass: u8,
}

impl MergeRule {
    pub fn merged(&self) -> String {
        format!("{}{JOIN}{}", self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseVocab {
    pub config: VocabConfig,
    phrases: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    rules: Vec<MergeRule>,
    bigram_rules: HashMap<(String, String), usize>,
    trigram_rules: HashMap<(String, String), usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSequence {
    pub comment_id: String,
    pub tokens: Vec<String>,
}

impl PhraseSequence {
    pub fn ids(&self, vocab: &PhraseVocab) -> Vec<Option<u32>> {
        self.tokens.iter().map(|t| vocab.id(t)).collect()
    }
}

type Counts = (HashMap<String, u64>, HashMap<(String, String), u64>);

fn count_stream(docs: &[Vec<String>]) -> Counts {
    docs.par_iter()
        .fold(
            || (HashMap::new(), HashMap::new()),
            |(mut uni, mut bi): Counts, doc| {
                for t in doc {
                    *uni.entry(t.clone()).or_insert(0) += 1;
                }
                for w in doc.windows(2) {
                    *bi.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
                }
                (uni, bi)
            },
        )
        .reduce(
            || (HashMap::new(), HashMap::new()),
            |(mut u1, mut b1), (u2, b2)| {
                for (k, v) in u2 {
                    *u1.entry(k).or_insert(0) += v;
                }
                for (k, v) in b2 {
                    *b1.entry(k).or_insert(0) += v;
                }
                (u1, b1)
            },
        )
}

fn select_rules(
    counts: &Counts,
    cfg: &VocabConfig,
    pass: u8,
    eligible_left: impl Fn(&str) -> bool,
) -> Vec<MergeRule> {
    let (uni, bi) = counts;
    let n: u64 = uni.values().sum();
    let mut rules: Vec<MergeRule> = bi
        .iter()
        .filter(|((a, _), &c)| c >= cfg.min_count && eligible_left(a))
        .filter_map(|((a, b), &c)| {
            let score = (c as f64 - cfg.delta) * n as f64 / (uni[a] as f64 * uni[b] as f64);
            (score >= cfg.score_threshold).then(|| MergeRule { left: a.clone(), right: b.clone(), score, count: c, pass })
        })
        .collect();
    rules.sort_by(|x, y| {
        y.score
            .total_cmp(&x.score)
            .then_with(|| x.left.cmp(&y.left))
            .then_with(|| x.right.cmp(&y.right))
    });
    rules
}

fn apply_rules(tokens: &[String], rules: &HashMap<(String, String), usize>) -> Vec<String> {
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if i + 1 < tokens.len() && rules.contains_key(&(tokens[i].clone(), tokens[i + 1].clone())) {
            out.push(format!("{}{JOIN}{}", tokens[i], tokens[i + 1]));
            i += 2;
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

fn rule_index(rules: &[MergeRule], pass: u8) -> HashMap<(String, String), usize> {
    rules
        .iter()
        .enumerate()
        .filter(|(_, r)| r.pass == pass)
        .map(|(i, r)| ((r.left.clone(), r.right.clone()), i))
        .collect()
}

impl PhraseVocab {
    /// Learn bigram merges, then trigram merges over the merged stream.
    ///
    /// A pair `(a, b)` merges iff `count(a,b) >= min_count` and
    /// `(count(a,b) - delta) * N / (count(a) * count(b)) >= score_threshold`.
    pub fn learn<S: AsRef<str> + Sync>(texts: &[S], cfg: VocabConfig) -> Result<PhraseVocab> {
        let docs: Vec<Vec<String>> = texts.par_iter().map(|t| word_tokens(t.as_ref())).collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::EmptyCorpus);
        }
        let pass1 = count_stream(&docs);
        let mut rules = select_rules(&pass1, &cfg, 1, |_| true);
        let bigram_rules = rule_index(&rules, 1);
        let merged: Vec<Vec<String>> = docs.par_iter().map(|d| apply_rules(d, &bigram_rules)).collect();

        let pass2 = count_stream(&merged);
        let bigrams: std::collections::HashSet<String> = rules.iter().map(MergeRule::merged).collect();
        rules.extend(select_rules(&pass2, &cfg, 2, |a| bigrams.contains(a)));
        let trigram_rules = rule_index(&rules, 2);
        let finals: Vec<Vec<String>> = merged.par_iter().map(|d| apply_rules(d, &trigram_rules)).collect();

        // Unigrams carry their frequency in the final stream; merged phrases
        // carry the pair count observed when their rule was formed.
        let mut freq: BTreeMap<String, u64> = BTreeMap::new();
        for t in finals.iter().flatten().filter(|t| !t.contains(JOIN)) {
            *freq.entry(t.clone()).or_insert(0) += 1;
        }
        freq.retain(|_, c| *c >= cfg.min_unigram_count);
        for r in &rules {
            freq.insert(r.merged(), r.count);
        }
        let mut entries: Vec<(String, u64)> = freq.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self::assemble(cfg, entries, rules))
    }

    fn assemble(config: VocabConfig, entries: Vec<(String, u64)>, rules: Vec<MergeRule>) -> PhraseVocab {
        let (phrases, counts): (Vec<String>, Vec<u64>) = entries.into_iter().unzip();
        let index = phrases.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let bigram_rules = rule_index(&rules, 1);
        let trigram_rules = rule_index(&rules, 2);
        PhraseVocab { config, phrases, counts, index, rules, bigram_rules, trigram_rules }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn phrase(&self, id: u32) -> &str {
        &self.phrases[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_count(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn id(&self, phrase: &str) -> Option<u32> {
        self.index.get(phrase).copied()
    }

    pub fn rules(&self) -> &[MergeRule] {
        &self.rules
    }

    pub fn multigrams(&self) -> impl Iterator<Item = &str> {
        self.phrases.iter().map(String::as_str).filter(|p| p.contains(JOIN))
    }

    pub fn has_rule(&self, left: &str, right: &str) -> bool {
        let key = (left.to_string(), right.to_string());
        self.bigram_rules.contains_key(&key) || self.trigram_rules.contains_key(&key)
    }

    /// Vocabulary entries whose surface form is closest to `query`
    /// (prefix matches first, then edit distance).
    pub fn fuzzy(&self, query: &str, n: usize) -> Vec<String> {
        let q = query.to_lowercase().replace(' ', "_");
        let mut scored: Vec<(usize, usize, &String)> = self
            .phrases
            .iter()
            .map(|p| {
                let prefix = if p.starts_with(&q) { 0 } else { 1 };
                (prefix, levenshtein(&q, p), p)
            })
            .collect();
        scored.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
        scored.into_iter().take(n).map(|(_, _, p)| p.clone()).collect()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let c = &self.config;
        writeln!(w, "{VOCAB_MAGIC} v{VOCAB_VERSION}")?;
        writeln!(
            w,
            "#config\tmin_count={}\tscore_threshold={:?}\tdelta={:?}\tmin_unigram_count={}",
            c.min_count, c.score_threshold, c.delta, c.min_unigram_count
        )?;
        for (p, n) in self.phrases.iter().zip(&self.counts) {
            writeln!(w, "P\t{p}\t{n}")?;
        }
        for r in &self.rules {
            writeln!(w, "R\t{}\t{}\t{:?}\t{}\t{}", r.left, r.right, r.score, r.count, r.pass)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<PhraseVocab> {
        let perr = |line: usize, m: &str| Error::Parse { line, message: m.to_string() };
        let mut config = VocabConfig::default();
        let mut entries = Vec::new();
        let mut rules = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            let ln = n + 1;
            if n == 0 {
                let expected = format!("{VOCAB_MAGIC} v{VOCAB_VERSION}");
                if line != expected {
                    return Err(Error::Version { expected, found: line });
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            match fields[0] {
                "#config" => {
                    for kv in &fields[1..] {
                        let (k, v) = kv.split_once('=').ok_or_else(|| perr(ln, "bad config"))?;
                        let bad = |_| perr(ln, "bad config value");
                        match k {
                            "min_count" => config.min_count = v.parse().map_err(|_| perr(ln, "bad min_count"))?,
                            "score_threshold" => config.score_threshold = v.parse().map_err(bad)?,
                            "delta" => config.delta = v.parse().map_err(bad)?,
                            "min_unigram_count" => {
                                config.min_unigram_count = v.parse().map_err(|_| perr(ln, "bad min_unigram_count"))?
                            }
                            _ => return Err(perr(ln, "unknown config key")),
                        }
                    }
                }
                "P" if fields.len() == 3 => {
                    let c = fields[2].parse().map_err(|_| perr(ln, "bad count"))?;
                    entries.push((fields[1].to_string(), c));
                }
                "R" if fields.len() == 6 => rules.push(MergeRule {
                    left: fields[1].to_string(),
                    right: fields[2].to_string(),
                    score: fields[3].parse().map_err(|_| perr(ln, "bad score"))?,
                    count: fields[4].parse().map_err(|_| perr(ln, "bad count"))?,
                    pass: fields[5].parse().map_err(|_| perr(ln, "bad pass"))?,
                }),
                _ => return Err(perr(ln, "unrecognized line")),
            }
        }
        Ok(Self::assemble(config, entries, rules))
    }

    /// Content hash of the serialized vocabulary.
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        crate::sha256_hex(&buf)
    }
}

/// Lowercase, strip URLs and markup, split into words, then apply bigram
/// and trigram merges greedily left to right. Unknown words stay as tokens.
pub fn tokenize(comment_id: &str, text: &str, vocab: &PhraseVocab) -> PhraseSequence {
    let words = word_tokens(text);
    let merged = apply_rules(&words, &vocab.bigram_rules);
    let tokens = apply_rules(&merged, &vocab.trigram_rules);
    PhraseSequence { comment_id: comment_id.to_string(), tokens }
}

pub(crate) fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.chars().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
