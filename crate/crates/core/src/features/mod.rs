//! Per-comment feature vectors: canon phrase rates, word-category rates,
//! integrative complexity, credibility cues, community feedback and SIF
//! document embeddings.

mod families;
mod lists;
mod sif;

pub use families::{
    canon_counts, category_counts, credibility_cues, feedback, question_count, quotation_count, CanonCounts,
    CanonIndex, ConnectiveIc, IcScorer,
};
pub use lists::{parse_lists, parse_valence, CategoryLexica, CueLists, Pattern, PatternList, CATEGORY_COUNT, CUE_LISTS};
pub use sif::{common_component, remove_common_component, sif_raw, SIF_A};

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::lexicon::{dimension_tag, Lexicon};
use crate::textprep::{word_tokens, PhraseSequence, PhraseVocab};

pub const SIF_DIM: usize = 50;
pub const CREDIBILITY_SLOTS: [&str; 8] =
    ["booster", "hedge", "modal", "evidential", "sentiment_pos", "sentiment_neg", "quotes", "questions"];

const MATRIX_FORMAT: &str = "canonlab-features";
const MATRIX_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Canon,
    Category,
    Ic,
    Credibility,
    Feedback,
    Sif,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub family: Family,
    pub normalization: String,
    /// Display tag, e.g. the dimension tags of a canon phrase.
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub slots: Vec<Slot>,
}

impl FeatureSchema {
    pub fn new(canon: &Lexicon, categories: &CategoryLexica) -> Self {
        let mut slots = Vec::new();
        let mut push = |name: String, family, norm: &str, tag: String| {
            slots.push(Slot { name, family, normalization: norm.to_string(), tag })
        };
        for (phrase, entry) in canon.entries() {
            let tags: Vec<String> = entry.dimensions.iter().map(|d| dimension_tag(d)).collect();
            push(format!("canon:{phrase}"), Family::Canon, "per_100_tokens", tags.join("/"));
        }
        for name in categories.names() {
            push(format!("category:{name}"), Family::Category, "per_100_words", "LEX".into());
        }
        push("ic".into(), Family::Ic, "score_1_7", "IC".into());
        for (i, name) in CREDIBILITY_SLOTS.iter().enumerate() {
            let norm = match i {
                0..=3 => "per_100_words",
                4 | 5 => "proportion",
                _ => "count",
            };
            push(format!("cred:{name}"), Family::Credibility, norm, "CRED".into());
        }
        push("feedback:score".into(), Family::Feedback, "raw", "FB".into());
        push("feedback:synchronicity".into(), Family::Feedback, "raw", "FB".into());
        for i in 0..SIF_DIM {
            push(format!("sif:{i:02}"), Family::Sif, "none", "SIF".into());
        }
        FeatureSchema { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn family_count(&self, family: Family) -> usize {
        self.slots.iter().filter(|s| s.family == family).count()
    }

    /// Slot counts in family order: canon, category, IC, credibility, feedback, SIF.
    pub fn family_counts(&self) -> [usize; 6] {
        [Family::Canon, Family::Category, Family::Ic, Family::Credibility, Family::Feedback, Family::Sif]
            .map(|f| self.family_count(f))
    }

    pub fn hash(&self) -> String {
        let mut buf = String::new();
        for s in &self.slots {
            buf.push_str(&format!("{}\t{:?}\t{}\n", s.name, s.family, s.normalization));
        }
        crate::sha256_hex(buf.as_bytes())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }
}

/// Rows of feature values keyed by comment id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema_hash: String,
    pub width: usize,
    pub ids: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixHeader {
    format: String,
    version: u32,
    schema_hash: String,
    slots: usize,
    comments: usize,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Header line, then one line per comment: the id followed by
    /// fixed-width values.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = MatrixHeader {
            format: MATRIX_FORMAT.into(),
            version: MATRIX_VERSION,
            schema_hash: self.schema_hash.clone(),
            slots: self.width,
            comments: self.rows(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for (i, id) in self.ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in self.row(i) {
                write!(w, "\t{:>24}", format!("{v:+.16e}"))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Read a matrix, refusing it when `expected_schema` is given and differs.
    pub fn read<R: BufRead>(reader: R, expected_schema: Option<&str>) -> Result<FeatureMatrix> {
        let mut lines = reader.lines();
        let head = lines.next().ok_or_else(|| Error::invalid("empty feature matrix file"))??;
        let h: MatrixHeader = serde_json::from_str(&head)?;
        if h.format != MATRIX_FORMAT || h.version != MATRIX_VERSION {
            return Err(Error::Version {
                expected: format!("{MATRIX_FORMAT} v{MATRIX_VERSION}"),
                found: format!("{} v{}", h.format, h.version),
            });
        }
        if let Some(exp) = expected_schema {
            if exp != h.schema_hash {
                return Err(Error::Schema(format!("feature matrix schema {} does not match {exp}", h.schema_hash)));
            }
        }
        let mut ids = Vec::with_capacity(h.comments);
        let mut values = Vec::with_capacity(h.comments * h.slots);
        for (n, line) in lines.enumerate() {
            let line = line?;
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_string();
            let before = values.len();
            for f in fields {
                values.push(f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: n + 2,
                    message: format!("bad value {f:?}"),
                })?);
            }
            if values.len() - before != h.slots {
                return Err(Error::Parse { line: n + 2, message: format!("expected {} values", h.slots) });
            }
            ids.push(id);
        }
        if ids.len() != h.comments {
            return Err(Error::invalid(format!("header promises {} rows, found {}", h.comments, ids.len())));
        }
        Ok(FeatureMatrix { schema_hash: h.schema_hash, width: h.slots, ids, values })
    }
}

/// Per-comment side outputs that are not part of the matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDebug {
    pub comment_id: String,
    pub canon_raw: Vec<u32>,
    pub missing_parent: bool,
}

/// Everything needed to turn comments into feature rows.
pub struct Extractor<'a> {
    pub schema: FeatureSchema,
    canon: CanonIndex,
    categories: &'a CategoryLexica,
    cues: &'a CueLists,
    ic: &'a dyn IcScorer,
    vocab: &'a PhraseVocab,
    sif_table: &'a EmbeddingTable,
    pub sif_a: f64,
}

impl<'a> Extractor<'a> {
    pub fn new(
        canon: &Lexicon,
        categories: &'a CategoryLexica,
        cues: &'a CueLists,
        ic: &'a dyn IcScorer,
        vocab: &'a PhraseVocab,
        sif_table: &'a EmbeddingTable,
    ) -> Result<Self> {
        if sif_table.k != SIF_DIM {
            return Err(Error::Schema(format!("document embeddings need k={SIF_DIM}, table has {}", sif_table.k)));
        }
        if sif_table.vocab_hash != vocab.hash() {
            return Err(Error::Schema("SIF embedding table was built for a different vocabulary".into()));
        }
        Ok(Extractor {
            schema: FeatureSchema::new(canon, categories),
            canon: CanonIndex::new(canon),
            categories,
            cues,
            ic,
            vocab,
            sif_table,
            sif_a: SIF_A,
        })
    }

    /// Every family except the SIF slots (which need a corpus-level pass),
    /// laid out in schema order with zeros in the SIF block.
    fn partial_row(
        &self,
        corpus: &Corpus,
        idx: usize,
        text: &str,
        seq: &PhraseSequence,
    ) -> (Vec<f64>, Vec<f64>, FeatureDebug) {
        let c = &corpus.comments()[idx];
        let empty = PhraseSequence { comment_id: c.id.clone(), tokens: Vec::new() };
        let (text, seq) = if c.empty_text { ("", &empty) } else { (text, seq) };
        let lower = word_tokens(text);
        let words: Vec<&str> = lower.iter().map(String::as_str).collect();

        let canon = canon_counts(seq, &self.canon);
        let mut row = Vec::with_capacity(self.schema.len());
        row.extend_from_slice(&canon.rates);
        row.extend(category_counts(&words, &self.categories.lists));
        row.push(self.ic.score(text));
        row.extend(credibility_cues(text, &words, self.cues));
        let (fb, missing_parent) = feedback(c, corpus.parent_of(c));
        row.extend(fb);
        row.extend(std::iter::repeat_n(0.0, SIF_DIM));
        let sif = sif_raw(seq, self.vocab, self.sif_table, self.sif_a);
        (row, sif, FeatureDebug { comment_id: c.id.clone(), canon_raw: canon.raw, missing_parent })
    }

    /// One row per comment in corpus order. `texts` and `sequences` are
    /// aligned with the corpus comments.
    pub fn extract_all(
        &self,
        corpus: &Corpus,
        texts: &[String],
        sequences: &[PhraseSequence],
    ) -> Result<(FeatureMatrix, Vec<FeatureDebug>)> {
        if texts.len() != corpus.len() || sequences.len() != corpus.len() {
            return Err(Error::invalid("texts and sequences must align with the corpus"));
        }
        let parts: Vec<_> =
            (0..corpus.len()).into_par_iter().map(|i| self.partial_row(corpus, i, &texts[i], &sequences[i])).collect();
        let mut rows = Vec::with_capacity(parts.len());
        let mut sifs = Vec::with_capacity(parts.len());
        let mut debug = Vec::with_capacity(parts.len());
        for (r, s, d) in parts {
            rows.push(r);
            sifs.push(s);
            debug.push(d);
        }
        remove_common_component(&mut sifs);
        let width = self.schema.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (mut r, s) in rows.into_iter().zip(sifs) {
            r[width - SIF_DIM..].copy_from_slice(&s);
            if let Some(bad) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("feature {}", self.schema.slots[bad].name)));
            }
            values.extend(r);
        }
        let ids = corpus.comments().iter().map(|c| c.id.clone()).collect();
        Ok((FeatureMatrix { schema_hash: self.schema.hash(), width, ids, values }, debug))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon_of(n: usize) -> Lexicon {
        let text: String = (0..n).map(|i| format!("foes\tphrase {i}\n")).collect();
        Lexicon::read(text.as_bytes()).unwrap()
    }

    #[test]
    fn paper_sized_schema_has_483_slots() {
        let s = FeatureSchema::new(&canon_of(403), &CategoryLexica::builtin());
        assert_eq!(s.len(), 483);
        assert_eq!(s.family_counts(), [403, 19, 1, 8, 2, 50]);
    }

    #[test]
    fn schema_hash_tracks_slots() {
        let a = FeatureSchema::new(&canon_of(3), &CategoryLexica::builtin());
        let b = FeatureSchema::new(&canon_of(4), &CategoryLexica::builtin());
        assert_eq!(a.hash(), FeatureSchema::new(&canon_of(3), &CategoryLexica::builtin()).hash());
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn matrix_round_trip_and_schema_check() {
        let m = FeatureMatrix {
            schema_hash: "abc".into(),
            width: 3,
            ids: vec!["a".into(), "b".into()],
            values: vec![1.0, -2.5, 1e-300, 0.0, 1.0 / 3.0, 7.0],
        };
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        assert_eq!(FeatureMatrix::read(buf.as_slice(), Some("abc")).unwrap(), m);
        assert!(matches!(FeatureMatrix::read(buf.as_slice(), Some("xyz")), Err(Error::Schema(_))));
    }
}
