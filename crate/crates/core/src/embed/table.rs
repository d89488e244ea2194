use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{randomized_svd, PmiMatrix};
use crate::error::{Error, Result};
use crate::textprep::PhraseVocab;

const EMB_FORMAT: &str = "canonlab-embeddings";
const EMB_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactorizeConfig {
    pub k: usize,
    pub seed: u64,
    pub power_iters: usize,
    pub oversample: usize,
    /// Exponent applied to the singular values when forming rows (0, 0.5 or 1).
    pub weighting: f64,
}

impl Default for FactorizeConfig {
    fn default() -> Self {
        FactorizeConfig { k: 200, seed: 0, power_iters: 3, oversample: 10, weighting: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub cosine: f64,
}

/// Dense rank-k phrase vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub k: usize,
    pub seed: u64,
    pub weighting: f64,
    pub vocab_hash: String,
    pub sigma: Vec<f64>,
    rows: Vec<f64>,
    norms: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    vocab_hash: String,
    k: usize,
    seed: u64,
    weighting: f64,
    rows: usize,
}

/// Truncated SVD of the PPMI matrix; row `i` is `U_i * sigma^weighting`.
pub fn factorize(pmi: &PmiMatrix, cfg: &FactorizeConfig, vocab_hash: &str) -> Result<EmbeddingTable> {
    if cfg.power_iters < 2 {
        return Err(Error::invalid("at least 2 power iterations are required"));
    }
    if !(0.0..=1.0).contains(&cfg.weighting) {
        return Err(Error::invalid(format!("weighting exponent {} outside [0, 1]", cfg.weighting)));
    }
    let svd = randomized_svd(&pmi.values, cfg.k, cfg.oversample, cfg.power_iters, cfg.seed)?;
    let n = pmi.values.rows;
    // Directions below numerical rank carry only rounding noise.
    let tol = svd.sigma.first().copied().unwrap_or(0.0) * n.max(pmi.values.cols) as f64 * f64::EPSILON;
    let scale: Vec<f64> =
        svd.sigma.iter().map(|&s| if s > tol { s.powf(cfg.weighting) } else { 0.0 }).collect();
    let mut rows = vec![0.0; n * cfg.k];
    for i in 0..n {
        for c in 0..cfg.k {
            rows[i * cfg.k + c] = svd.u[(i, c)] * scale[c];
        }
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding rows".into()));
    }
    Ok(EmbeddingTable::from_rows(cfg.k, cfg.seed, cfg.weighting, vocab_hash.to_string(), svd.sigma, rows))
}

impl EmbeddingTable {
    pub fn from_rows(k: usize, seed: u64, weighting: f64, vocab_hash: String, sigma: Vec<f64>, rows: Vec<f64>) -> Self {
        assert_eq!(rows.len() % k.max(1), 0);
        let norms = rows.chunks(k).map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        EmbeddingTable { k, seed, weighting, vocab_hash, sigma, rows, norms }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize * self.k;
        &self.rows[i..i + self.k]
    }

    pub fn cosine(&self, a: u32, b: u32) -> f64 {
        let (na, nb) = (self.norms[a as usize], self.norms[b as usize]);
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        dot(self.row(a), self.row(b)) / (na * nb)
    }

    fn rank(&self, scores: Vec<(u32, f64)>, n: usize) -> Vec<Neighbor> {
        let mut scores = scores;
        scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scores.into_iter().take(n).map(|(id, cosine)| Neighbor { id, cosine }).collect()
    }

    /// Top-`n` phrases by cosine to `id`, excluding `id`; ties by ascending id.
    pub fn neighbors(&self, id: u32, n: usize) -> Vec<Neighbor> {
        let scores = (0..self.len() as u32)
            .into_par_iter()
            .filter(|&j| j != id)
            .map(|j| (j, self.cosine(id, j)))
            .collect();
        self.rank(scores, n)
    }

    pub fn neighbors_of_vector(&self, v: &[f64], n: usize) -> Result<Vec<Neighbor>> {
        if v.len() != self.k {
            return Err(Error::invalid(format!("query has dimension {}, table has {}", v.len(), self.k)));
        }
        let nv = dot(v, v).sqrt();
        let scores = (0..self.len() as u32)
            .into_par_iter()
            .map(|j| {
                let nj = self.norms[j as usize];
                let c = if nv == 0.0 || nj == 0.0 { 0.0 } else { dot(v, self.row(j)) / (nv * nj) };
                (j, c)
            })
            .collect();
        Ok(self.rank(scores, n))
    }

    /// Neighbors of a phrase string. Unknown phrases yield the closest
    /// lexical matches in the error.
    pub fn neighbors_of_phrase(&self, vocab: &PhraseVocab, phrase: &str, n: usize) -> Result<Vec<Neighbor>> {
        match vocab.id(phrase) {
            Some(id) if (id as usize) < self.len() => Ok(self.neighbors(id, n)),
            _ => Err(Error::UnknownPhrase { phrase: phrase.to_string(), candidates: vocab.fuzzy(phrase, 5) }),
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            format: EMB_FORMAT.into(),
            version: EMB_VERSION,
            vocab_hash: self.vocab_hash.clone(),
            k: self.k,
            seed: self.seed,
            weighting: self.weighting,
            rows: self.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in self.sigma.iter().chain(&self.rows) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Load a snapshot, refusing it when built against a different vocabulary.
    pub fn read<R: BufRead>(mut r: R, expected_vocab_hash: &str) -> Result<EmbeddingTable> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: Header = serde_json::from_str(line.trim_end())?;
        if h.format != EMB_FORMAT || h.version != EMB_VERSION {
            return Err(Error::Version {
                expected: format!("{EMB_FORMAT} v{EMB_VERSION}"),
                found: format!("{} v{}", h.format, h.version),
            });
        }
        if h.vocab_hash != expected_vocab_hash {
            return Err(Error::Schema(format!(
                "embedding snapshot built for vocab {}, current vocab is {}",
                h.vocab_hash, expected_vocab_hash
            )));
        }
        let mut read_vec = |len: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; len * 8];
            r.read_exact(&mut buf)?;
            Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
        };
        let sigma = read_vec(h.k)?;
        let rows = read_vec(h.k * h.rows)?;
        Ok(EmbeddingTable::from_rows(h.k, h.seed, h.weighting, h.vocab_hash, sigma, rows))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{count_cooc, pmi, Csr, StopList};
    use crate::textprep::{tokenize, VocabConfig};

    fn table(rows: Vec<Vec<f64>>) -> EmbeddingTable {
        let k = rows[0].len();
        EmbeddingTable::from_rows(k, 0, 0.5, "h".into(), vec![1.0; k], rows.concat())
    }

    #[test]
    fn orthogonal_neighbor_listed_with_zero() {
        let t = table(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let n = t.neighbors(0, 10);
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].id, 1);
        assert_eq!(n[0].cosine, 0.0);
    }

    #[test]
    fn duplicates_are_mutual_top_one() {
        let t = table(vec![vec![1.0, 2.0, 0.5], vec![0.3, -1.0, 2.0], vec![1.0, 2.0, 0.5]]);
        assert_eq!(t.neighbors(0, 1)[0].id, 2);
        assert_eq!(t.neighbors(2, 1)[0].id, 0);
        assert!((t.neighbors(0, 1)[0].cosine - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_break_by_id() {
        let t = table(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 2.0]]);
        let ids: Vec<u32> = t.neighbors(0, 3).iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
    }

    #[test]
    fn vector_query_dimension_checked() {
        let t = table(vec![vec![1.0, 0.0]]);
        assert!(t.neighbors_of_vector(&[1.0], 3).is_err());
        assert_eq!(t.neighbors_of_vector(&[2.0, 0.0], 3).unwrap()[0].id, 0);
    }

    #[test]
    fn diagonal_ppmi_gives_orthogonal_rows() {
        let n = 6;
        let t: Vec<(u32, u32, f64)> = (0..n).map(|i| (i as u32, i as u32, 1.0 + i as f64)).collect();
        let p = PmiMatrix { values: Csr::from_sorted(n, n, &t), marginals: vec![1.0; n], total: 1.0 };
        let e = factorize(&p, &FactorizeConfig { k: n, seed: 3, oversample: 0, ..Default::default() }, "h").unwrap();
        for a in 0..n as u32 {
            for b in 0..n as u32 {
                if a != b {
                    assert!(e.cosine(a, b).abs() < 1e-9);
                }
            }
        }
    }

    /// Two blocks of phrases; members of a block share the same context words.
    #[test]
    fn planted_blocks_separate() {
        let mut docs = Vec::new();
        for r in 0..60 {
            let (members, ctx) = if r % 2 == 0 { (["aa", "ab", "ac"], ["p", "q", "r", "s"]) } else { (["ba", "bb", "bc"], ["w", "x", "y", "z"]) };
            let m = members[r % 3];
            docs.push(format!("{} {} {} {} {}", ctx[r % 4], m, ctx[(r + 1) % 4], ctx[(r + 2) % 4], ctx[(r + 3) % 4]));
        }
        let vocab = PhraseVocab::learn(&docs, VocabConfig { min_count: 1000, ..Default::default() }).unwrap();
        let seqs: Vec<_> = docs.iter().map(|d| tokenize("x", d, &vocab)).collect();
        let c = count_cooc(&seqs, &vocab, 5, &StopList::none()).unwrap();
        let p = pmi(&c).unwrap();
        let e = factorize(&p, &FactorizeConfig { k: 6, seed: 11, ..Default::default() }, &vocab.hash()).unwrap();
        let id = |s| vocab.id(s).unwrap();
        let a = ["aa", "ab", "ac"].map(id);
        let b = ["ba", "bb", "bc"].map(id);
        let min_within = a
            .iter()
            .flat_map(|&x| a.iter().map(move |&y| (x, y)))
            .chain(b.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))))
            .filter(|(x, y)| x != y)
            .map(|(x, y)| e.cosine(x, y))
            .fold(f64::INFINITY, f64::min);
        let e = &e;
        let max_cross =
            a.iter().flat_map(|&x| b.iter().map(move |&y| e.cosine(x, y))).fold(f64::NEG_INFINITY, f64::max);
        assert!(min_within > max_cross, "{min_within} <= {max_cross}");
    }

    #[test]
    fn snapshot_refuses_other_vocab() {
        let t = table(vec![vec![1.0, 0.0], vec![0.5, 0.5]]);
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(EmbeddingTable::read(buf.as_slice(), "h").unwrap(), t);
        assert!(matches!(EmbeddingTable::read(buf.as_slice(), "other"), Err(Error::Schema(_))));
    }

    #[test]
    fn unknown_phrase_carries_candidates() {
        let vocab = PhraseVocab::learn(&["hillary hrc potus"], VocabConfig::default()).unwrap();
        let t = table(vec![vec![1.0, 0.0]; 3]);
        match t.neighbors_of_phrase(&vocab, "hilary", 3) {
            Err(Error::UnknownPhrase { candidates, .. }) => assert_eq!(candidates[0], "hillary"),
            other => panic!("{other:?}"),
        }
    }
}
