//! Journaled interactive sessions: lexicon expansion and annotation.

use std::collections::BTreeMap;
use std::io::BufRead;

use canonlab_core::embed::EmbeddingTable;
use canonlab_core::learner::{ActiveSession, Next};
use canonlab_core::lexicon::{EvidenceIndex, ExpansionSession, LexiconEvent, SuggestContext, SuggestResult};
use canonlab_core::sampling::{Label, LabeledEntry, LabeledSet};
use canonlab_core::textprep::{PhraseSequence, PhraseVocab};
use canonlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::pipeline::{self, names};
use crate::workspace::Workspace;

fn read_jsonl<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in bytes.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Lexicon expansion over the workspace vocabulary and phrase embeddings.
pub struct LexiconState {
    pub session: ExpansionSession,
    pub vocab: PhraseVocab,
    pub table: EmbeddingTable,
    pub evidence: EvidenceIndex,
    pub suggestions: usize,
}

impl LexiconState {
    /// Load the seed and replay the journal when one is registered.
    pub fn open(ws: &Workspace) -> Result<LexiconState> {
        let seed = pipeline::read_lexicon(ws, names::SEED)?;
        let vocab = pipeline::read_vocab(ws)?;
        let table = pipeline::read_table(ws, names::EMBEDDINGS, &vocab)?;
        let sequences: Vec<PhraseSequence> = pipeline::read_sequences(ws)?;
        let evidence = EvidenceIndex::build(&sequences, &vocab, ws.config.lexicon.evidence);
        let events: Vec<LexiconEvent> = match ws.entry(names::LEXICON_JOURNAL) {
            Some(_) => read_jsonl(&ws.read_bytes(names::LEXICON_JOURNAL)?)?,
            None => Vec::new(),
        };
        let session = ExpansionSession::replay(ws.config.lexicon.session.clone(), seed, &events)?;
        Ok(LexiconState { session, vocab, table, evidence, suggestions: ws.config.lexicon.suggestions })
    }

    pub fn suggest(&mut self, query: Option<&str>, n: usize) -> SuggestResult {
        let ctx = SuggestContext { vocab: &self.vocab, table: &self.table, evidence: &self.evidence };
        self.session.suggest(ctx, query, n)
    }

    pub fn accept(&mut self, ws: &mut Workspace, phrase: &str, dimensions: &[String]) -> Result<bool> {
        let changed = self.session.accept(&self.vocab, phrase, dimensions)?;
        if changed {
            self.persist(ws)?;
        }
        Ok(changed)
    }

    pub fn reject(&mut self, ws: &mut Workspace, phrase: &str) -> Result<()> {
        let before = self.session.log().len();
        self.session.reject(&self.vocab, phrase)?;
        if self.session.log().len() != before {
            self.persist(ws)?;
        }
        Ok(())
    }

    /// Write the journal and the canon it produces.
    pub fn persist(&self, ws: &mut Workspace) -> Result<()> {
        let up = ws.upstream(&[names::SEED, names::VOCAB], &[])?;
        ws.put(names::LEXICON_JOURNAL, "lexicon_journal.jsonl", &to_jsonl(self.session.log())?, up)?;
        let up = ws.upstream(&[names::SEED, names::VOCAB, names::LEXICON_JOURNAL], &[])?;
        let mut canon = Vec::new();
        self.session.lexicon().write(&mut canon)?;
        ws.put(names::CANON, "canon.tsv", &canon, up)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum AnnotateEvent {
    Label { comment_id: String, label: Label, time: i64 },
    Skip { comment_id: String },
}

/// Active-learning annotation over one pool.
pub struct AnnotationState {
    pub pool: String,
    pub annotator: String,
    pub session: ActiveSession,
    pub journal: Vec<AnnotateEvent>,
}

impl AnnotationState {
    pub fn open(ws: &Workspace, pool: &str) -> Result<AnnotationState> {
        let journal_name = names::annotate_journal(pool);
        let labels_name = names::labels(pool);
        if let Some(e) = ws.entry(&labels_name) {
            if !e.upstream.contains_key(&journal_name) {
                return Err(Error::invalid(format!(
                    "{labels_name} holds imported labels; annotation sessions and batch imports cannot share a pool"
                )));
            }
        }
        let (ids, rows) = pipeline::pool_rows(ws, pool)?;
        let session = ActiveSession::new(ids, &rows, ws.config.annotate.active.clone())?;
        let mut state =
            AnnotationState { pool: pool.to_string(), annotator: ws.config.annotate.annotator.clone(), session, journal: Vec::new() };
        if ws.entry(&journal_name).is_some() {
            let events: Vec<AnnotateEvent> = read_jsonl(&ws.read_bytes(&journal_name)?)?;
            for e in events {
                state.apply(e)?;
            }
        }
        Ok(state)
    }

    /// Peek at the pending item, choosing one if none is pending.
    pub fn pending(&mut self) -> Next {
        self.session.next_to_label()
    }

    /// Apply one event as it would arrive from the operator. The item must
    /// be the pending one.
    pub fn apply(&mut self, event: AnnotateEvent) -> Result<()> {
        let pending = match self.session.next_to_label() {
            Next::Item(id) => Some(id),
            Next::Exhausted => None,
        };
        let id = match &event {
            AnnotateEvent::Label { comment_id, .. } | AnnotateEvent::Skip { comment_id } => comment_id,
        };
        if self.session.label_of(id).is_some() {
            return Err(Error::AlreadyLabeled(id.clone()));
        }
        if pending.as_deref() != Some(id.as_str()) {
            return Err(Error::NotPending(id.clone()));
        }
        match &event {
            AnnotateEvent::Label { comment_id, label, .. } => self.session.submit_label(comment_id, *label)?,
            AnnotateEvent::Skip { comment_id } => self.session.skip(comment_id)?,
        }
        self.journal.push(event);
        Ok(())
    }

    pub fn labeled_set(&self) -> LabeledSet {
        let times: BTreeMap<&str, i64> = self
            .journal
            .iter()
            .filter_map(|e| match e {
                AnnotateEvent::Label { comment_id, time, .. } => Some((comment_id.as_str(), *time)),
                AnnotateEvent::Skip { .. } => None,
            })
            .collect();
        LabeledSet {
            entries: self
                .session
                .stream()
                .iter()
                .map(|(id, label)| LabeledEntry {
                    comment_id: id.clone(),
                    label: *label,
                    annotator: self.annotator.clone(),
                    timestamp: times.get(id.as_str()).copied().unwrap_or(0),
                    pool: self.pool.clone(),
                })
                .collect(),
        }
    }

    /// Write the journal and the labeled set it produces.
    pub fn persist(&self, ws: &mut Workspace) -> Result<()> {
        let pool_name = names::pool(&self.pool);
        let journal_name = names::annotate_journal(&self.pool);
        let up = ws.upstream(&[&pool_name, names::FEATURES], &["annotate"])?;
        ws.put(&journal_name, &format!("{journal_name}.jsonl"), &to_jsonl(&self.journal)?, up)?;
        let up = ws.upstream(&[&pool_name, &journal_name], &[])?;
        let mut bytes = Vec::new();
        self.labeled_set().write(&mut bytes)?;
        let labels_name = names::labels(&self.pool);
        ws.put(&labels_name, &format!("{labels_name}.jsonl"), &bytes, up)?;
        Ok(())
    }
}
