use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::Csr;
use crate::error::{Error, Result};
use crate::textprep::{PhraseSequence, PhraseVocab, JOIN};

/// Phrases excluded as co-occurrence targets and contexts. They still occupy
/// window positions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopList {
    ids: HashSet<u32>,
}

impl StopList {
    pub fn none() -> Self {
        Self::default()
    }

    /// The most frequent `fraction` of unigrams (rounded down).
    pub fn top_fraction(vocab: &PhraseVocab, fraction: f64) -> Self {
        let mut unigrams: Vec<u32> =
            (0..vocab.len() as u32).filter(|&i| !vocab.phrase(i).contains(JOIN)).collect();
        let n = (unigrams.len() as f64 * fraction).floor() as usize;
        unigrams.sort_by(|&a, &b| vocab.count(b).cmp(&vocab.count(a)).then(a.cmp(&b)));
        StopList { ids: unigrams.into_iter().take(n).collect() }
    }

    pub fn from_phrases(vocab: &PhraseVocab, phrases: &[&str]) -> Self {
        StopList { ids: phrases.iter().filter_map(|p| vocab.id(p)).collect() }
    }

    pub fn contains(&self, id: u32) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Symmetric phrase co-occurrence counts with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CoocMatrix {
    pub window: usize,
    pub counts: Csr,
}

impl CoocMatrix {
    pub fn dim(&self) -> usize {
        self.counts.rows
    }

    pub fn count(&self, a: u32, b: u32) -> u64 {
        self.counts.get(a as usize, b as usize) as u64
    }

    pub fn total(&self) -> f64 {
        self.counts.values.iter().sum()
    }
}

/// Count co-occurrences of phrase pairs at token distance `<= window - 1`
/// inside one comment. Each unordered position pair increments both
/// directions.
pub fn count_cooc(
    sequences: &[PhraseSequence],
    vocab: &PhraseVocab,
    window: usize,
    stop: &StopList,
) -> Result<CoocMatrix> {
    if window < 2 {
        return Err(Error::invalid(format!("co-occurrence window must be >= 2, got {window}")));
    }
    let span = window - 1;
    let map = sequences
        .par_iter()
        .fold(HashMap::<(u32, u32), u64>::new, |mut acc, seq| {
            let ids: Vec<Option<u32>> =
                seq.ids(vocab).into_iter().map(|id| id.filter(|&i| !stop.contains(i))).collect();
            for i in 0..ids.len() {
                let Some(a) = ids[i] else { continue };
                for b in ids[i + 1..ids.len().min(i + span + 1)].iter().flatten() {
                    if a != *b {
                        *acc.entry((a, *b)).or_insert(0) += 1;
                        *acc.entry((*b, a)).or_insert(0) += 1;
                    }
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    let mut triplets: Vec<(u32, u32, f64)> = map.into_iter().map(|((a, b), c)| (a, b, c as f64)).collect();
    triplets.sort_unstable_by_key(|&(a, b, _)| (a, b));
    let n = vocab.len();
    Ok(CoocMatrix { window, counts: Csr::from_sorted(n, n, &triplets) })
}
