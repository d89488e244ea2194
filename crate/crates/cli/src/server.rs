//! JSON-over-HTTP service for lexicon expansion and annotation.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use canonlab_core::corpus::{Comment, Corpus};
use canonlab_core::learner::{Evaluation, MetricPoint, Next};
use canonlab_core::lexicon::{vocab_form, Lexicon, SuggestResult};
use canonlab_core::sampling::Label;
use canonlab_core::textprep::words;
use canonlab_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::RwLock;

use crate::pipeline::{self, names};
use crate::sessions::{AnnotateEvent, AnnotationState, LexiconState};
use crate::workspace::Workspace;

/// Everything the endpoints read or mutate. Mutations hold the write lock,
/// so they are applied one at a time.
pub struct ServiceState {
    pub ws: Workspace,
    pub lexicon: Option<LexiconState>,
    pub annotate: Option<AnnotationState>,
    pub corpus: Option<Corpus>,
    /// Canon used for highlights when no lexicon session is loaded.
    pub canon: Option<Lexicon>,
}

impl ServiceState {
    /// Load the sessions the workspace supports. A session that cannot be
    /// opened is reported as an error when `require_*` is set and skipped
    /// otherwise.
    pub fn load(ws: Workspace, require_lexicon: bool, require_annotate: bool) -> canonlab_core::Result<ServiceState> {
        let lexicon = match LexiconState::open(&ws) {
            Ok(s) => Some(s),
            Err(e) if require_lexicon => return Err(e),
            Err(_) => None,
        };
        let pool = ws.config.annotate.pool.clone();
        let annotate = match AnnotationState::open(&ws, &pool) {
            Ok(s) => Some(s),
            Err(e) if require_annotate => return Err(e),
            Err(_) => None,
        };
        let corpus = ws.entry(names::CORPUS).map(|_| pipeline::read_corpus(&ws)).transpose()?;
        let canon = ws.entry(names::CANON).and_then(|_| pipeline::read_lexicon(&ws, names::CANON).ok());
        Ok(ServiceState { ws, lexicon, annotate, corpus, canon })
    }

    fn highlight_lexicon(&self) -> Option<&Lexicon> {
        self.lexicon.as_ref().map(|l| l.session.lexicon()).or(self.canon.as_ref())
    }
}

#[derive(Clone)]
pub struct AppState(pub Arc<RwLock<ServiceState>>);

impl AppState {
    pub fn new(state: ServiceState) -> Self {
        AppState(Arc::new(RwLock::new(state)))
    }
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, body: json!({ "error": message.into() }) }
    }

    fn unavailable(what: &str) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, format!("no {what} session is loaded"))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::UnknownPhrase { phrase, candidates } => ApiError {
                status: StatusCode::NOT_FOUND,
                body: json!({ "error": message, "phrase": phrase, "candidates": candidates }),
            },
            Error::NotPending(_) | Error::AlreadyLabeled(_) => ApiError::new(StatusCode::CONFLICT, message),
            Error::InvalidInput(_) | Error::Parse { .. } => ApiError::new(StatusCode::BAD_REQUEST, message),
            Error::MissingArtifact(_) => ApiError::new(StatusCode::NOT_FOUND, message),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn finite(v: f64, what: &str) -> Result<f64, ApiError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("non-finite value in {what}")))
    }
}

fn check_evaluation(e: &Evaluation) -> Result<(), ApiError> {
    finite(e.abstention_rate, "abstention rate")?;
    for v in e.precision.iter().chain(&e.recall).chain([&e.balanced_accuracy, &e.adjusted_balanced_accuracy]).flatten() {
        finite(*v, "metrics")?;
    }
    Ok(())
}

fn check_history(history: &[MetricPoint]) -> Result<(), ApiError> {
    for p in history {
        for e in p.cross_validated.iter().chain(&p.held_out) {
            check_evaluation(e)?;
        }
    }
    Ok(())
}

/// Attach the workspace artifact hashes to a payload.
fn with_hashes(st: &ServiceState, mut body: Value) -> Json<Value> {
    if let Value::Object(m) = &mut body {
        m.insert("artifacts".into(), json!(st.ws.hashes()));
    }
    Json(body)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/lexicon", get(get_lexicon))
        .route("/lexicon/suggest", get(suggest))
        .route("/lexicon/accept", post(accept))
        .route("/lexicon/reject", post(reject))
        .route("/annotate/next", get(next))
        .route("/annotate/label", post(label))
        .route("/annotate/skip", post(skip))
        .route("/annotate/metrics", get(metrics))
        .route("/comments/{id}", get(comment))
        .route("/reports/{kind}", get(report))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn get_lexicon(State(app): State<AppState>) -> ApiResult {
    let st = app.0.read().await;
    let lex = st.lexicon.as_ref().ok_or_else(|| ApiError::unavailable("lexicon"))?;
    let lexicon = lex.session.lexicon();
    let dims: BTreeMap<&str, Vec<&str>> = lexicon.dimensions().into_iter().map(|d| (d, lexicon.dimension(d))).collect();
    Ok(with_hashes(
        &st,
        json!({
            "session": lex.session.id,
            "size": lexicon.len(),
            "dimensions": dims,
            "rejected": lex.session.rejected(),
        }),
    ))
}

#[derive(Deserialize)]
pub struct SuggestQuery {
    q: Option<String>,
    n: Option<usize>,
}

async fn suggest(State(app): State<AppState>, Query(query): Query<SuggestQuery>) -> ApiResult {
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let lex = st.lexicon.as_mut().ok_or_else(|| ApiError::unavailable("lexicon"))?;
    let n = query.n.unwrap_or(lex.suggestions);
    let q = query.q.as_deref().map(str::trim).filter(|q| !q.is_empty());
    match lex.suggest(q, n) {
        SuggestResult::Suggestions { query, items } => {
            for s in &items {
                finite(s.score, "suggestion score")?;
            }
            Ok(with_hashes(st, json!({ "query": query, "items": items })))
        }
        SuggestResult::DidYouMean { query, candidates } => Err(ApiError {
            status: StatusCode::NOT_FOUND,
            body: json!({ "error": format!("unknown phrase {query:?}"), "query": query, "candidates": candidates }),
        }),
    }
}

#[derive(Deserialize)]
pub struct AcceptBody {
    phrase: String,
    dimensions: Vec<String>,
}

async fn accept(State(app): State<AppState>, Json(body): Json<AcceptBody>) -> ApiResult {
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let lex = st.lexicon.as_mut().ok_or_else(|| ApiError::unavailable("lexicon"))?;
    let accepted = lex.accept(&mut st.ws, &body.phrase, &body.dimensions)?;
    let size = lex.session.lexicon().len();
    Ok(with_hashes(st, json!({ "phrase": vocab_form(&body.phrase), "accepted": accepted, "size": size })))
}

#[derive(Deserialize)]
pub struct RejectBody {
    phrase: String,
}

async fn reject(State(app): State<AppState>, Json(body): Json<RejectBody>) -> ApiResult {
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let lex = st.lexicon.as_mut().ok_or_else(|| ApiError::unavailable("lexicon"))?;
    lex.reject(&mut st.ws, &body.phrase)?;
    let rejected = lex.session.rejected().len();
    Ok(with_hashes(st, json!({ "phrase": vocab_form(&body.phrase), "rejected": rejected })))
}

fn annotate_status(a: &AnnotationState) -> Value {
    json!({
        "pool": a.pool,
        "labeled": a.session.labeled_count(),
        "metric_points": a.session.history().len(),
        "complete": a.session.is_complete(),
    })
}

async fn next(State(app): State<AppState>) -> ApiResult {
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let a = st.annotate.as_mut().ok_or_else(|| ApiError::unavailable("annotation"))?;
    let mut body = annotate_status(a);
    match a.pending() {
        Next::Item(id) => {
            body["holdout"] = json!(a.session.is_holdout(&id));
            body["comment_id"] = json!(id);
            body["exhausted"] = json!(false);
        }
        Next::Exhausted => {
            body["comment_id"] = Value::Null;
            body["exhausted"] = json!(true);
        }
    }
    Ok(with_hashes(st, body))
}

#[derive(Deserialize)]
pub struct LabelBody {
    comment_id: String,
    label: String,
}

fn now() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64)
}

async fn label(State(app): State<AppState>, Json(body): Json<LabelBody>) -> ApiResult {
    let label: Label = body.label.parse()?;
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let a = st.annotate.as_mut().ok_or_else(|| ApiError::unavailable("annotation"))?;
    a.apply(AnnotateEvent::Label { comment_id: body.comment_id.clone(), label, time: now() })?;
    a.persist(&mut st.ws)?;
    let mut out = annotate_status(a);
    out["comment_id"] = json!(body.comment_id);
    out["label"] = json!(label);
    Ok(with_hashes(st, out))
}

#[derive(Deserialize)]
pub struct SkipBody {
    comment_id: String,
}

async fn skip(State(app): State<AppState>, Json(body): Json<SkipBody>) -> ApiResult {
    let mut guard = app.0.write().await;
    let st = &mut *guard;
    let a = st.annotate.as_mut().ok_or_else(|| ApiError::unavailable("annotation"))?;
    a.apply(AnnotateEvent::Skip { comment_id: body.comment_id.clone() })?;
    a.persist(&mut st.ws)?;
    let mut out = annotate_status(a);
    out["skipped"] = json!(body.comment_id);
    Ok(with_hashes(st, out))
}

async fn metrics(State(app): State<AppState>) -> ApiResult {
    let st = app.0.read().await;
    let a = st.annotate.as_ref().ok_or_else(|| ApiError::unavailable("annotation"))?;
    check_history(a.session.history())?;
    let cfg = a.session.config();
    let mut body = annotate_status(a);
    body["eval_interval"] = json!(cfg.eval_interval);
    body["tau"] = json!(finite(cfg.tau, "tau")?);
    body["history"] = json!(a.session.history());
    Ok(with_hashes(&st, body))
}

/// A lexicon phrase occurrence in a comment body, in byte offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub phrase: String,
    pub dimensions: Vec<String>,
}

/// Leftmost-longest occurrences of lexicon phrases over the word sequence
/// of `text`.
pub fn highlight_spans(text: &str, lexicon: &Lexicon) -> Vec<Span> {
    let phrases: BTreeMap<&str, Vec<String>> =
        lexicon.entries().map(|(p, e)| (p, e.dimensions.iter().cloned().collect())).collect();
    let longest = phrases.keys().map(|p| p.split(' ').count()).max().unwrap_or(0);
    let ws = words(text);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < ws.len() {
        let hit = (1..=longest.min(ws.len() - i)).rev().find_map(|len| {
            let key = ws[i..i + len].iter().map(|w| w.lower.as_str()).collect::<Vec<_>>().join(" ");
            phrases.get(key.as_str()).map(|dims| (len, key, dims.clone()))
        });
        match hit {
            Some((len, phrase, dimensions)) => {
                spans.push(Span { start: ws[i].start, end: ws[i + len - 1].end, phrase, dimensions });
                i += len;
            }
            None => i += 1,
        }
    }
    spans
}

fn comment_json(c: &Comment, lexicon: Option<&Lexicon>) -> Value {
    let spans = lexicon.map(|l| highlight_spans(&c.body, l)).unwrap_or_default();
    json!({
        "id": c.id,
        "parent_id": c.parent_id,
        "thread_id": c.thread_id,
        "community": c.community,
        "author": c.author,
        "created_at": c.created_at,
        "score": c.score,
        "body": c.body,
        "spans": spans,
    })
}

async fn comment(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let st = app.0.read().await;
    let corpus = st.corpus.as_ref().ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "no corpus is loaded"))?;
    let c = corpus.get(&id).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown comment {id}")))?;
    let lex = st.highlight_lexicon();
    let parent = corpus.parent_of(c).map(|p| comment_json(p, lex));
    let mut body = comment_json(c, lex);
    body["parent"] = parent.unwrap_or(Value::Null);
    if let Some(a) = &st.annotate {
        body["label"] = json!(a.session.label_of(&id));
    }
    Ok(with_hashes(&st, body))
}

async fn report(State(app): State<AppState>, Path(kind): Path<String>) -> ApiResult {
    let st = app.0.read().await;
    let (text_name, data_name) =
        names::report(&kind).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown report {kind}")))?;
    // Reports are written by the batch commands while the service runs, so
    // the registry is reread from disk.
    let ws = Workspace::open(&st.ws.root)?;
    let text = String::from_utf8_lossy(&ws.read_bytes(text_name)?).into_owned();
    let data_bytes = ws.read_bytes(data_name)?;
    let data: Vec<Value> = data_bytes
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .map(serde_json::from_slice)
        .collect::<Result<_, _>>()
        .map_err(Error::from)?;
    Ok(Json(json!({ "kind": kind, "text": text, "data": data, "artifacts": ws.hashes() })))
}
