//! Shared fixtures for the benchmarks.

use canonlab_core::embed::{embed_sequences, EmbedConfig, EmbeddingTable, FactorizeConfig};
use canonlab_core::synth::AliasFixture;
use canonlab_core::textprep::{tokenize, PhraseSequence, PhraseVocab, VocabConfig};

/// Planted-alias texts with their learned vocabulary and phrase sequences.
pub struct AliasWorld {
    pub texts: Vec<String>,
    pub vocab: PhraseVocab,
    pub seqs: Vec<PhraseSequence>,
}

pub fn alias_world(comments: usize, seed: u64) -> AliasWorld {
    let texts = AliasFixture { comments, ..AliasFixture::pairs() }.generate(seed);
    let vocab = PhraseVocab::learn(&texts, VocabConfig::default()).expect("fixture vocabulary");
    let seqs = texts.iter().enumerate().map(|(i, t)| tokenize(&format!("c{i:05}"), t, &vocab)).collect();
    AliasWorld { texts, vocab, seqs }
}

pub fn embed_config(k: usize) -> EmbedConfig {
    EmbedConfig { factorize: FactorizeConfig { k, seed: 0, ..Default::default() }, ..Default::default() }
}

impl AliasWorld {
    pub fn table(&self, k: usize) -> EmbeddingTable {
        embed_sequences(&self.seqs, &self.vocab, &embed_config(k)).expect("fixture embeddings")
    }
}
