//! Windowed co-occurrence counts, positive PMI, and truncated SVD phrase
//! embeddings with cosine neighbor queries.

mod cooc;
mod pmi;
mod svd;
mod table;

pub use cooc::{count_cooc, CoocMatrix, StopList};
pub use pmi::{pmi, PmiMatrix};
pub use svd::{randomized_svd, TruncatedSvd};
pub use table::{factorize, EmbeddingTable, FactorizeConfig, Neighbor};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::textprep::{PhraseSequence, PhraseVocab};

/// Settings for the full sequences-to-table build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub window: usize,
    /// Fraction of the most frequent unigrams dropped as targets and contexts.
    pub stop_fraction: f64,
    #[serde(flatten)]
    pub factorize: FactorizeConfig,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig { window: 5, stop_fraction: 0.001, factorize: FactorizeConfig::default() }
    }
}

/// Co-occurrence, PPMI and factorization in one step.
pub fn embed_sequences(sequences: &[PhraseSequence], vocab: &PhraseVocab, cfg: &EmbedConfig) -> Result<EmbeddingTable> {
    let stop = StopList::top_fraction(vocab, cfg.stop_fraction);
    let cooc = count_cooc(sequences, vocab, cfg.window, &stop)?;
    let ppmi = pmi(&cooc)?;
    factorize(&ppmi, &cfg.factorize, &vocab.hash())
}

/// Compressed sparse row matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl Csr {
    /// Build from triplets sorted by (row, col) with no duplicates.
    pub fn from_sorted(rows: usize, cols: usize, triplets: &[(u32, u32, f64)]) -> Csr {
        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in triplets {
            indptr[r as usize + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            rows,
            cols,
            indptr,
            indices: triplets.iter().map(|t| t.1).collect(),
            values: triplets.iter().map(|t| t.2).collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        self.indices[a..b].iter().map(|&j| j as usize).zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        match self.indices[a..b].binary_search(&(j as u32)) {
            Ok(p) => self.values[a + p],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `self * x` for a dense column-major `x` with `cols` rows.
    pub fn mul_dense(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        assert_eq!(x.nrows(), self.cols);
        let k = x.ncols();
        let rows: Vec<Vec<f64>> = (0..self.rows)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; k];
                for (j, v) in self.row(i) {
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += v * x[(j, c)];
                    }
                }
                acc
            })
            .collect();
        nalgebra::DMatrix::from_fn(self.rows, k, |i, c| rows[i][c])
    }

    /// `self^T * x` for a dense `x` with `rows` rows.
    pub fn tmul_dense(&self, x: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        assert_eq!(x.nrows(), self.rows);
        let mut out = nalgebra::DMatrix::zeros(self.cols, x.ncols());
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                for c in 0..x.ncols() {
                    out[(j, c)] += v * x[(i, c)];
                }
            }
        }
        out
    }
}
