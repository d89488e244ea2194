//! Batch stages. Each reads current upstream artifacts and registers its
//! outputs; nothing written depends on the wall clock.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use canonlab_core::corpus::{Corpus, FieldMapping};
use canonlab_core::embed::{embed_sequences, EmbedConfig, EmbeddingTable, FactorizeConfig};
use canonlab_core::engagement::{
    encode_all, fit_its, fit_tenure, its_plot_data, build_tenure, Contribution, ItsWindow, ModelKind, Scope, UserEvent,
};
use canonlab_core::features::{CategoryLexica, ConnectiveIc, CueLists, Extractor, FeatureMatrix, FeatureSchema, SIF_DIM};
use canonlab_core::importance::fit_importance;
use canonlab_core::learner::{
    pool_predictions, read_predictions, stack_row, train_final, write_predictions, ClassDistribution, Classifier, Dataset,
    LogisticConfig, LogisticModel, ModelArtifact, PoolingStrategy, PredictionRecord, TrainedModel,
};
use canonlab_core::lexicon::Lexicon;
use canonlab_core::sampling::{biased_pool, one_sided_select, random_pool, Label, LabeledEntry, LabeledSet, Pool};
use canonlab_core::stats::Standardizer;
use canonlab_core::textprep::{
    resolve_corpus, tokenize, NearestAntecedentResolver, PhraseSequence, PhraseVocab, ResolvedText,
};
use canonlab_core::{Error, Result};

use crate::config::MappingKind;
use crate::sessions::LexiconState;
use crate::workspace::Workspace;

/// Registered artifact names.
pub mod names {
    pub const CORPUS: &str = "corpus";
    pub const REJECTS: &str = "rejects";
    pub const RESOLVED: &str = "resolved";
    pub const VOCAB: &str = "vocab";
    pub const SEQUENCES: &str = "sequences";
    pub const EMBEDDINGS: &str = "embeddings";
    pub const DOC_EMBEDDINGS: &str = "doc_embeddings";
    pub const SEED: &str = "seed";
    pub const LEXICON_JOURNAL: &str = "lexicon_journal";
    pub const CANON: &str = "canon";
    pub const FEATURES: &str = "features";
    pub const FEATURES_DEBUG: &str = "features_debug";
    pub const POOL_SWEEP: &str = "pool_sweep";
    pub const MODEL_RF: &str = "model_rf";
    pub const MODEL_GBT: &str = "model_gbt";
    pub const MODEL_STACK: &str = "model_stack";
    pub const GRID_RF: &str = "grid_rf";
    pub const GRID_GBT: &str = "grid_gbt";
    pub const PREDICTIONS: &str = "predictions";
    pub const REPORT_IMPORTANCE: &str = "report_importance";
    pub const DATA_IMPORTANCE: &str = "data_importance";
    pub const REPORT_ITS: &str = "report_its";
    pub const DATA_ITS: &str = "data_its";
    pub const REPORT_TENURE: &str = "report_tenure";
    pub const DATA_TENURE: &str = "data_tenure";

    pub const POOLS: [&str; 2] = ["random", "biased"];

    pub fn pool(p: &str) -> String {
        format!("pool_{p}")
    }

    pub fn labels(p: &str) -> String {
        format!("labels_{p}")
    }

    pub fn annotate_journal(p: &str) -> String {
        format!("annotate_journal_{p}")
    }

    /// Text and data artifacts behind `/reports/{kind}`.
    pub fn report(kind: &str) -> Option<(&'static str, &'static str)> {
        match kind {
            "importance" => Some((REPORT_IMPORTANCE, DATA_IMPORTANCE)),
            "its" => Some((REPORT_ITS, DATA_ITS)),
            "tenure" => Some((REPORT_TENURE, DATA_TENURE)),
            _ => None,
        }
    }
}

fn check_pool_name(pool: &str) -> Result<()> {
    if names::POOLS.contains(&pool) {
        Ok(())
    } else {
        Err(Error::invalid(format!("unknown pool {pool:?}; expected random or biased")))
    }
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

fn parse_jsonl<T: for<'de> serde::Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    bytes
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|(i, l)| serde_json::from_str(&l?).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

pub fn read_corpus(ws: &Workspace) -> Result<Corpus> {
    Corpus::read_snapshot(ws.read_bytes(names::CORPUS)?.as_slice())
}

pub fn read_resolved(ws: &Workspace) -> Result<Vec<ResolvedText>> {
    parse_jsonl(&ws.read_bytes(names::RESOLVED)?)
}

pub fn read_vocab(ws: &Workspace) -> Result<PhraseVocab> {
    PhraseVocab::read(ws.read_bytes(names::VOCAB)?.as_slice())
}

pub fn read_sequences(ws: &Workspace) -> Result<Vec<PhraseSequence>> {
    parse_jsonl(&ws.read_bytes(names::SEQUENCES)?)
}

pub fn read_table(ws: &Workspace, name: &str, vocab: &PhraseVocab) -> Result<EmbeddingTable> {
    EmbeddingTable::read(ws.read_bytes(name)?.as_slice(), &vocab.hash())
}

pub fn read_lexicon(ws: &Workspace, name: &str) -> Result<Lexicon> {
    Lexicon::read(ws.read_bytes(name)?.as_slice())
}

pub fn read_features(ws: &Workspace) -> Result<FeatureMatrix> {
    FeatureMatrix::read(ws.read_bytes(names::FEATURES)?.as_slice(), None)
}

pub fn read_pool(ws: &Workspace, pool: &str) -> Result<Pool> {
    check_pool_name(pool)?;
    Pool::read(ws.read_bytes(&names::pool(pool))?.as_slice())
}

pub fn read_labels(ws: &Workspace, pool: &str) -> Result<LabeledSet> {
    LabeledSet::read(ws.read_bytes(&names::labels(pool))?.as_slice())
}

pub fn read_predictions_artifact(ws: &Workspace) -> Result<Vec<PredictionRecord>> {
    read_predictions(ws.read_bytes(names::PREDICTIONS)?.as_slice())
}

fn read_model(ws: &Workspace, name: &str, schema: &str) -> Result<ModelArtifact> {
    ModelArtifact::read(ws.read_bytes(name)?.as_slice(), Some(schema))
}

/// Pool ids with their raw feature rows.
pub fn pool_rows(ws: &Workspace, pool: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let p = read_pool(ws, pool)?;
    let fm = read_features(ws)?;
    let rows = p
        .ids
        .iter()
        .map(|id| {
            fm.position(id)
                .map(|i| fm.row(i).to_vec())
                .ok_or_else(|| Error::invalid(format!("no features for pool comment {id}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((p.ids, rows))
}

pub fn ingest(ws: &mut Workspace, input: Option<&Path>) -> Result<String> {
    let path = match input {
        Some(p) => p.to_path_buf(),
        None => ws.resolve(
            ws.config.ingest.input.as_deref().ok_or_else(|| Error::invalid("no input given and ingest.input is unset"))?,
        ),
    };
    let raw = std::fs::read(&path)?;
    let mapping = match ws.config.ingest.mapping {
        MappingKind::Default => FieldMapping::default(),
        MappingKind::Pushshift => FieldMapping::pushshift(),
    };
    let corpus = Corpus::ingest(BufReader::new(raw.as_slice()), &mapping)?;
    let mut up = ws.upstream(&[], &["ingest"])?;
    Workspace::source(&mut up, "comments", &raw);
    let mut snap = Vec::new();
    corpus.write_snapshot(&mut snap)?;
    ws.put(names::CORPUS, "corpus.jsonl", &snap, up.clone())?;
    let mut rej = Vec::new();
    corpus.write_rejects(&mut rej)?;
    ws.put(names::REJECTS, "rejects.jsonl", &rej, up)?;
    Ok(format!(
        "ingested {} comments ({} rejected, {} duplicates)",
        corpus.len(),
        corpus.rejects.len(),
        corpus.duplicates
    ))
}

pub fn vocab(ws: &mut Workspace) -> Result<String> {
    let corpus = read_corpus(ws)?;
    let resolved = if ws.config.coref.enabled {
        resolve_corpus(&corpus, &NearestAntecedentResolver::new())?
    } else {
        corpus
            .comments()
            .iter()
            .map(|c| ResolvedText::identity(&c.id, if c.empty_text { "" } else { &c.body }))
            .collect()
    };
    let up = ws.upstream(&[names::CORPUS], &["coref"])?;
    ws.put(names::RESOLVED, "resolved.jsonl", &jsonl(&resolved)?, up)?;

    let texts: Vec<&str> = resolved.iter().map(|r| r.text.as_str()).collect();
    let vocab = PhraseVocab::learn(&texts, ws.config.vocab)?;
    let mut vbytes = Vec::new();
    vocab.write(&mut vbytes)?;
    let up = ws.upstream(&[names::RESOLVED], &["vocab"])?;
    ws.put(names::VOCAB, "vocab.txt", &vbytes, up)?;

    let seqs: Vec<PhraseSequence> = resolved.iter().map(|r| tokenize(&r.comment_id, &r.text, &vocab)).collect();
    let up = ws.upstream(&[names::RESOLVED, names::VOCAB], &[])?;
    ws.put(names::SEQUENCES, "sequences.jsonl", &jsonl(&seqs)?, up)?;
    Ok(format!("vocabulary of {} phrases ({} merge rules)", vocab.len(), vocab.rules().len()))
}

pub fn embed(ws: &mut Workspace) -> Result<String> {
    let vocab = read_vocab(ws)?;
    let seqs = read_sequences(ws)?;
    let cfg = ws.config.embed.table;
    let table = embed_sequences(&seqs, &vocab, &cfg)?;
    let doc_cfg = EmbedConfig {
        factorize: FactorizeConfig { k: SIF_DIM, seed: ws.config.embed.doc_seed, ..cfg.factorize },
        ..cfg
    };
    let doc = embed_sequences(&seqs, &vocab, &doc_cfg)?;
    let up = ws.upstream(&[names::VOCAB, names::SEQUENCES], &["embed"])?;
    let mut bytes = Vec::new();
    table.write(&mut bytes)?;
    ws.put(names::EMBEDDINGS, "embeddings.tbl", &bytes, up.clone())?;
    let mut bytes = Vec::new();
    doc.write(&mut bytes)?;
    ws.put(names::DOC_EMBEDDINGS, "doc_embeddings.tbl", &bytes, up)?;
    Ok(format!("embedded {} phrases at k={} and k={SIF_DIM}", table.len(), table.k))
}

/// Import the configured seed lexicon and rebuild the canon from it and
/// any recorded expansion decisions.
pub fn lexicon_import(ws: &mut Workspace) -> Result<String> {
    let seed_path = ws.resolve(ws.config.lexicon.seed.as_deref().ok_or_else(|| Error::invalid("lexicon.seed is unset"))?);
    let raw = std::fs::read(&seed_path)?;
    let seed = Lexicon::read(raw.as_slice())?;
    let mut up = ws.upstream(&[], &[])?;
    Workspace::source(&mut up, "seed", &raw);
    let mut bytes = Vec::new();
    seed.write(&mut bytes)?;
    ws.put(names::SEED, "seed.tsv", &bytes, up)?;
    let state = LexiconState::open(ws)?;
    state.persist(ws)?;
    Ok(format!(
        "seed of {} phrases; canon of {} phrases after {} recorded decisions",
        seed.len(),
        state.session.lexicon().len(),
        state.session.log().len()
    ))
}

pub fn features(ws: &mut Workspace) -> Result<String> {
    let corpus = read_corpus(ws)?;
    let resolved = read_resolved(ws)?;
    let seqs = read_sequences(ws)?;
    let vocab = read_vocab(ws)?;
    let doc = read_table(ws, names::DOC_EMBEDDINGS, &vocab)?;
    let canon = read_lexicon(ws, names::CANON)?;
    let (cats, cues, ic) = (CategoryLexica::builtin(), CueLists::builtin(), ConnectiveIc::default());
    let ex = Extractor::new(&canon, &cats, &cues, &ic, &vocab, &doc)?;
    let texts: Vec<String> = resolved.into_iter().map(|r| r.text).collect();
    let (matrix, debug) = ex.extract_all(&corpus, &texts, &seqs)?;
    let up = ws.upstream(
        &[names::CORPUS, names::RESOLVED, names::SEQUENCES, names::VOCAB, names::DOC_EMBEDDINGS, names::CANON],
        &[],
    )?;
    let mut bytes = Vec::new();
    matrix.write(&mut bytes)?;
    ws.put(names::FEATURES, "features.tsv", &bytes, up.clone())?;
    ws.put(names::FEATURES_DEBUG, "features_debug.jsonl", &jsonl(&debug)?, up)?;
    Ok(format!("{} comments x {} slots (schema {})", matrix.rows(), matrix.width, &matrix.schema_hash[..12]))
}

pub fn pool(ws: &mut Workspace) -> Result<String> {
    let corpus = read_corpus(ws)?;
    let fm = read_features(ws)?;
    let cfg = ws.config.pool.clone();
    let random = random_pool(&corpus, cfg.random_size, cfg.random_seed, &HashSet::new())?;
    let exclude: HashSet<String> = random.ids.iter().cloned().collect();
    let (biased, sweep) = biased_pool(&fm, &cfg.biased, &exclude)?;
    let up = ws.upstream(&[names::CORPUS, names::FEATURES], &["pool"])?;
    for (kind, p) in [("random", &random), ("biased", &biased)] {
        let mut bytes = Vec::new();
        p.write(&mut bytes)?;
        let name = names::pool(kind);
        ws.put(&name, &format!("{name}.txt"), &bytes, up.clone())?;
    }
    let mut sweep_bytes = serde_json::to_vec_pretty(&sweep)?;
    sweep_bytes.push(b'\n');
    ws.put(names::POOL_SWEEP, "pool_sweep.json", &sweep_bytes, up)?;
    Ok(format!("random pool {} comments, biased pool {} comments", random.ids.len(), biased.ids.len()))
}

/// Import `comment_id<TAB>label` lines into a pool's labeled set.
pub fn annotate_import(ws: &mut Workspace, pool: &str, input: &Path) -> Result<String> {
    check_pool_name(pool)?;
    if ws.entry(&names::annotate_journal(pool)).is_some() {
        return Err(Error::invalid(format!("pool {pool} has an annotation session journal; import into the other pool")));
    }
    let p = read_pool(ws, pool)?;
    let members: HashSet<&str> = p.ids.iter().map(String::as_str).collect();
    let mut set = match ws.entry(&names::labels(pool)) {
        Some(_) => read_labels(ws, pool)?,
        None => LabeledSet::default(),
    };
    let annotator = ws.config.annotate.annotator.clone();
    let text = std::fs::read_to_string(input)?;
    let mut added = 0;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::Parse { line: n + 1, message: "expected comment_id<TAB>label".into() })?;
        let label: Label = label.parse().map_err(|e: Error| Error::Parse { line: n + 1, message: e.to_string() })?;
        if !members.contains(id) {
            return Err(Error::Parse { line: n + 1, message: format!("comment {id} is not in the {pool} pool") });
        }
        if let Some(prev) = set.entries.iter().find(|e| e.comment_id == id && e.annotator == annotator) {
            if prev.label != label {
                return Err(Error::AlreadyLabeled(format!("{id} as {} (line {} says {label})", prev.label, n + 1)));
            }
            continue;
        }
        set.insert(LabeledEntry {
            comment_id: id.to_string(),
            label,
            annotator: annotator.clone(),
            timestamp: 0,
            pool: pool.to_string(),
        })?;
        added += 1;
    }
    let up = ws.upstream(&[&names::pool(pool)], &[])?;
    let mut bytes = Vec::new();
    set.write(&mut bytes)?;
    let name = names::labels(pool);
    ws.put(&name, &format!("{name}.jsonl"), &bytes, up)?;
    let counts = set.class_counts();
    Ok(format!(
        "{added} labels added to {pool}; {} total (belief {}, dissonance {}, neutral {})",
        set.len(),
        counts[0],
        counts[1],
        counts[2]
    ))
}

fn dataset(entries: &[LabeledEntry], fm: &FeatureMatrix) -> Result<Dataset> {
    let mut x = Vec::with_capacity(entries.len());
    let mut y = Vec::with_capacity(entries.len());
    for e in entries {
        let i = fm.position(&e.comment_id).ok_or_else(|| Error::invalid(format!("no features for {}", e.comment_id)))?;
        x.push(fm.row(i).to_vec());
        y.push(e.label.index());
    }
    Ok(Dataset { x, y })
}

fn distribution(p: [f64; 3]) -> Result<ClassDistribution> {
    let s: f64 = p.iter().sum();
    ClassDistribution::new([p[0] / s, p[1] / s, p[2] / s])
}

pub fn train(ws: &mut Workspace) -> Result<String> {
    let fm = read_features(ws)?;
    let cfg = ws.config.train.clone();
    let mut sets = Vec::new();
    let mut log = String::new();
    for pool in names::POOLS {
        let entries = read_labels(ws, pool)?.entries;
        let kept = if cfg.one_sided_selection { one_sided_select(&entries, &fm, cfg.seed)? } else { entries.clone() };
        let _ = write!(log, "{pool}: {} labels, {} after selection; ", entries.len(), kept.len());
        sets.push(kept);
    }
    let random = dataset(&sets[0], &fm)?;
    let biased = dataset(&sets[1], &fm)?;
    let ((rf, rf_grid), (gbt, gbt_grid)) = train_final(&random, &biased, &cfg.rf, &cfg.gbt, cfg.folds, cfg.seed)?;
    let rf_art = ModelArtifact::new(
        TrainedModel::Forest(rf),
        serde_json::to_value(&rf_grid.best)?,
        &fm.schema_hash,
        cfg.seed,
    );
    let gbt_art = ModelArtifact::new(
        TrainedModel::Gbt(gbt),
        serde_json::to_value(&gbt_grid.best)?,
        &fm.schema_hash,
        cfg.seed,
    );

    // Stacker: logistic regression on both models' outputs and the features.
    let union: Vec<&LabeledEntry> = sets.iter().flatten().collect();
    let mut x = Vec::with_capacity(union.len());
    let mut y = Vec::with_capacity(union.len());
    for e in &union {
        let row = fm.row(fm.position(&e.comment_id).expect("checked by dataset"));
        let a = distribution(rf_art.predict_proba(row))?;
        let b = distribution(gbt_art.predict_proba(row))?;
        x.push(stack_row(&a, &b, row));
        y.push(e.label.index());
    }
    let standardizer = Standardizer::fit(&x);
    let stack_data = Dataset { x: standardizer.transform(&x), y };
    let stack_cfg = LogisticConfig::default();
    let mut stack_art = ModelArtifact::new(
        TrainedModel::Logistic(LogisticModel::fit(&stack_data, &stack_cfg)),
        serde_json::to_value(stack_cfg)?,
        &fm.schema_hash,
        cfg.seed,
    );
    stack_art.standardizer = Some(standardizer);

    let up = ws.upstream(&[names::FEATURES, &names::labels("random"), &names::labels("biased")], &["train"])?;
    for (name, file, art) in [
        (names::MODEL_RF, "models/rf.json", &rf_art),
        (names::MODEL_GBT, "models/gbt.json", &gbt_art),
        (names::MODEL_STACK, "models/stack.json", &stack_art),
    ] {
        let mut bytes = Vec::new();
        art.write(&mut bytes)?;
        ws.put(name, file, &bytes, up.clone())?;
    }
    for (name, file, grid) in
        [(names::GRID_RF, "models/grid_rf.json", &rf_grid), (names::GRID_GBT, "models/grid_gbt.json", &gbt_grid)]
    {
        let mut bytes = Vec::new();
        grid.write(&mut bytes)?;
        ws.put(name, file, &bytes, up.clone())?;
    }
    Ok(format!(
        "{log}random forest cv score {:.4}, boosted trees cv score {:.4}",
        rf_grid.best_score, gbt_grid.best_score
    ))
}

pub fn predict(ws: &mut Workspace) -> Result<String> {
    let fm = read_features(ws)?;
    let strategy: PoolingStrategy = ws.config.predict.strategy.parse()?;
    let rf = read_model(ws, names::MODEL_RF, &fm.schema_hash)?;
    let gbt = read_model(ws, names::MODEL_GBT, &fm.schema_hash)?;
    let stacker =
        if strategy == PoolingStrategy::Stacking { Some(read_model(ws, names::MODEL_STACK, &fm.schema_hash)?) } else { None };
    let mut records = Vec::with_capacity(fm.rows());
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..fm.rows() {
        let row = fm.row(i);
        let a = distribution(rf.predict_proba(row))?;
        let b = distribution(gbt.predict_proba(row))?;
        let stack = stacker.as_ref().map(|s| (s as &dyn Classifier, row));
        let p = pool_predictions(a, b, strategy, stack)?;
        *counts.entry(format!("{:?}", p.outcome).to_lowercase()).or_default() += 1;
        records.push(PredictionRecord { comment_id: fm.ids[i].clone(), a: a.0, b: b.0, outcome: p.outcome, strategy });
    }
    let mut inputs = vec![names::FEATURES, names::MODEL_RF, names::MODEL_GBT];
    if stacker.is_some() {
        inputs.push(names::MODEL_STACK);
    }
    let up = ws.upstream(&inputs, &["predict"])?;
    let mut bytes = Vec::new();
    write_predictions(&mut bytes, &records)?;
    ws.put(names::PREDICTIONS, "predictions.jsonl", &bytes, up)?;
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    Ok(format!("{} predictions ({strategy}): {}", records.len(), summary.join(", ")))
}

/// Non-abstained predicted labels keyed by comment id.
fn predicted_labels(records: &[PredictionRecord]) -> HashMap<String, Label> {
    records.iter().filter_map(|r| r.outcome.label().map(|l| (r.comment_id.clone(), l))).collect()
}

fn insufficient(w: &mut Vec<u8>, what: &str, reason: &str) -> Result<()> {
    writeln!(w, "{what}: insufficient data ({reason})")?;
    Ok(())
}

pub fn importance(ws: &mut Workspace) -> Result<String> {
    let fm = read_features(ws)?;
    let canon = read_lexicon(ws, names::CANON)?;
    let schema = FeatureSchema::new(&canon, &CategoryLexica::builtin());
    if schema.hash() != fm.schema_hash {
        return Err(Error::Schema("feature matrix was built with a different canon".into()));
    }
    let preds = read_predictions_artifact(ws)?;
    let labels = predicted_labels(&preds);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (i, id) in fm.ids.iter().enumerate() {
        if let Some(&l) = labels.get(id) {
            rows.push(fm.row(i).to_vec());
            y.push(l);
        }
    }
    let cfg = ws.config.importance.clone();
    let mut text = Vec::new();
    let mut data = Vec::new();
    let summary = match fit_importance(&rows, &y, &schema.slots, &cfg.fit) {
        Ok(report) => {
            report.write_text(&mut text, cfg.top)?;
            let top: BTreeMap<String, _> =
                Label::ALL.iter().map(|&l| (l.to_string(), report.top_features(l, cfg.top))).collect();
            let value = serde_json::json!({
                "status": "fitted",
                "comments": rows.len(),
                "lambda": report.lambda,
                "l1_ratio": report.l1_ratio,
                "top": top,
            });
            serde_json::to_writer(&mut data, &value)?;
            format!("importance fitted on {} predicted labels at lambda {:.4e}", rows.len(), report.lambda)
        }
        Err(e @ (Error::SingleClass(_) | Error::InvalidInput(_))) => {
            insufficient(&mut text, "feature importance", &e.to_string())?;
            serde_json::to_writer(&mut data, &serde_json::json!({"status": "insufficient_data", "reason": e.to_string()}))?;
            format!("importance: insufficient data ({e})")
        }
        Err(e) => return Err(e),
    };
    data.push(b'\n');
    let up = ws.upstream(&[names::FEATURES, names::CANON, names::PREDICTIONS], &["importance"])?;
    ws.put(names::REPORT_IMPORTANCE, "reports/importance.txt", &text, up.clone())?;
    ws.put(names::DATA_IMPORTANCE, "reports/importance.json", &data, up)?;
    Ok(summary)
}

fn community(ws: &Workspace) -> Result<String> {
    ws.config.engagement.community.clone().ok_or_else(|| Error::invalid("engagement.community is unset"))
}

/// First disclosure of `label` per user inside `community`, with the
/// user's full contribution history.
fn disclosure_events(corpus: &Corpus, community: &str, labels: &HashMap<String, Label>, label: Label) -> Vec<UserEvent> {
    let mut history: BTreeMap<&str, Vec<Contribution>> = BTreeMap::new();
    let mut first: BTreeMap<&str, i64> = BTreeMap::new();
    for c in corpus.comments() {
        let inside = c.community == community;
        history.entry(&c.author).or_default().push(Contribution { time: c.created_at, inside });
        if inside && labels.get(&c.id) == Some(&label) {
            let t = first.entry(&c.author).or_insert(c.created_at);
            *t = (*t).min(c.created_at);
        }
    }
    first
        .into_iter()
        .map(|(user, intervention)| UserEvent {
            user: user.to_string(),
            intervention,
            contributions: history.remove(user).unwrap_or_default(),
        })
        .collect()
}

pub fn its(ws: &mut Workspace) -> Result<String> {
    let corpus = read_corpus(ws)?;
    let community = community(ws)?;
    let labels = predicted_labels(&read_predictions_artifact(ws)?);
    let window = ItsWindow::new(ws.config.its.window)?;
    let robust = ws.config.its.cluster_robust;
    let mut text = Vec::new();
    let mut data = Vec::new();
    let mut fitted = 0;
    for label in [Label::Dissonance, Label::Belief] {
        let events = disclosure_events(&corpus, &community, &labels, label);
        for scope in [Scope::Inside, Scope::Outside] {
            let title = format!("{label} disclosures, {scope:?} {community}, {}-week window", window.weeks()).to_lowercase();
            writeln!(text, "== {title}")?;
            let (obs, excluded) = encode_all(&events, window, scope);
            let mut reasons: BTreeMap<String, usize> = BTreeMap::new();
            for (_, x) in &excluded {
                *reasons.entry(serde_json::to_value(x)?.as_str().unwrap_or("other").to_string()).or_default() += 1;
            }
            writeln!(text, "users with an event: {}, kept: {}, excluded: {:?}", events.len(), events.len() - excluded.len(), reasons)?;
            let entry = match fit_its(&obs, scope, robust) {
                Ok(fit) => {
                    fit.write_text(&mut text)?;
                    fitted += 1;
                    serde_json::json!({
                        "label": label, "scope": scope, "window": window.weeks(), "status": "fitted",
                        "excluded": reasons, "fit": fit, "plot": its_plot_data(&obs, &fit),
                    })
                }
                Err(e) => {
                    insufficient(&mut text, "interrupted time series", &e.to_string())?;
                    serde_json::json!({
                        "label": label, "scope": scope, "window": window.weeks(), "status": "insufficient_data",
                        "excluded": reasons, "reason": e.to_string(),
                    })
                }
            };
            writeln!(text)?;
            serde_json::to_writer(&mut data, &entry)?;
            data.push(b'\n');
        }
    }
    let up = ws.upstream(&[names::CORPUS, names::PREDICTIONS], &["engagement", "its"])?;
    ws.put(names::REPORT_ITS, "reports/its.txt", &text, up.clone())?;
    ws.put(names::DATA_ITS, "reports/its.jsonl", &data, up)?;
    Ok(format!("its: {fitted} of 4 fits estimated"))
}

pub fn tenure(ws: &mut Workspace) -> Result<String> {
    let corpus = read_corpus(ws)?;
    let community = community(ws)?;
    let labels = predicted_labels(&read_predictions_artifact(ws)?);
    let cfg = ws.config.tenure.clone();
    let records = build_tenure(corpus.comments(), &community, &labels, ws.config.engagement.ban_time, &cfg.records)?;
    let kept = records.iter().filter(|r| !r.censored).count();
    let mut text = Vec::new();
    let mut data = Vec::new();
    writeln!(text, "tenure records: {} users, {} censored, {kept} used", records.len(), records.len() - kept)?;
    let mut fitted = 0;
    for model in [ModelKind::NegativeBinomial, ModelKind::Ols, ModelKind::Logit] {
        let name = serde_json::to_value(model)?.as_str().unwrap_or("model").to_string();
        writeln!(text, "\n== {name}")?;
        match fit_tenure(&records, model, None, cfg.logit_ridge) {
            Ok(report) => {
                report.write_text(&mut text)?;
                report.write_jsonl(&mut data)?;
                fitted += 1;
            }
            Err(e) => {
                insufficient(&mut text, &name, &e.to_string())?;
                serde_json::to_writer(
                    &mut data,
                    &serde_json::json!({"model": model, "status": "insufficient_data", "reason": e.to_string()}),
                )?;
                data.push(b'\n');
            }
        }
    }
    let up = ws.upstream(&[names::CORPUS, names::PREDICTIONS], &["engagement", "tenure"])?;
    ws.put(names::REPORT_TENURE, "reports/tenure.txt", &text, up.clone())?;
    ws.put(names::DATA_TENURE, "reports/tenure.jsonl", &data, up)?;
    Ok(format!("tenure: {} users, {fitted} of 3 models fitted", records.len()))
}
