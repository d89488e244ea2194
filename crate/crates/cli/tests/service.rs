mod common;

use std::path::Path;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use canonlab_cli::pipeline;
use canonlab_cli::server::{router, AppState, ServiceState};
use canonlab_cli::Workspace;
use canonlab_core::corpus::Corpus;
use canonlab_core::learner::ActiveSession;
use canonlab_core::sampling::LabeledSet;
use http_body_util::BodyExt;
use regex::Regex;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{alias_workspace, copy_dir, oracle_label, run_ok, threaded_inputs, DOWNSTREAM, PIPELINE};

fn app(dir: &Path) -> Router {
    let ws = Workspace::open(dir).unwrap();
    router(AppState::new(ServiceState::load(ws, false, false).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req.header("content-type", "application/json").body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    call(app, "GET", uri, None).await
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body)).await
}

fn suggested(v: &Value) -> Vec<String> {
    v["items"].as_array().unwrap().iter().map(|i| i["phrase"].as_str().unwrap().to_string()).collect()
}

fn corpus(dir: &Path) -> Corpus {
    pipeline::read_corpus(&Workspace::open(dir).unwrap()).unwrap()
}

/// Label `n` pending items with oracle labels through the service.
async fn label_many(app: &Router, corpus: &Corpus, n: usize) {
    for _ in 0..n {
        let (s, next) = get(app, "/annotate/next").await;
        assert_eq!(s, StatusCode::OK);
        let id = next["comment_id"].as_str().unwrap().to_string();
        let label = oracle_label(&corpus.get(&id).unwrap().body).to_string();
        let (s, body) = post(app, "/annotate/label", json!({ "comment_id": id, "label": label })).await;
        assert_eq!(s, StatusCode::OK, "{body}");
    }
}

#[tokio::test]
async fn suggestions_for_a_seed_include_its_aliases() {
    let dir = alias_workspace();
    let app = app(dir.path());
    let (s, v) = get(&app, "/lexicon/suggest?q=hrc&n=10").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let items = suggested(&v);
    for alias in ["hillary", "killary", "hc"] {
        assert!(items.contains(&alias.to_string()), "{alias} missing from {items:?}");
    }
    assert!(v["items"].as_array().unwrap().iter().all(|i| i["score"].as_f64().unwrap().is_finite()));
    assert!(v["artifacts"]["canon"].is_string());
}

#[tokio::test]
async fn accepted_phrase_joins_the_lexicon_and_leaves_suggestions() {
    let dir = alias_workspace();
    let app = app(dir.path());
    let (_, before) = get(&app, "/lexicon").await;
    let (s, v) = post(&app, "/lexicon/accept", json!({ "phrase": "hillary", "dimensions": ["foes"] })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["accepted"], json!(true));
    let (_, after) = get(&app, "/lexicon").await;
    assert_eq!(after["size"].as_u64().unwrap(), before["size"].as_u64().unwrap() + 1);
    let foes: Vec<&str> = after["dimensions"]["foes"].as_array().unwrap().iter().map(|p| p.as_str().unwrap()).collect();
    assert!(foes.contains(&"hillary"), "{foes:?}");
    assert_ne!(before["artifacts"]["canon"], after["artifacts"]["canon"]);

    let (_, v) = get(&app, "/lexicon/suggest?q=hrc&n=10").await;
    assert!(!suggested(&v).contains(&"hillary".to_string()));

    let (s, v) = post(&app, "/lexicon/reject", json!({ "phrase": "killary" })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let (_, v) = get(&app, "/lexicon/suggest?q=hrc&n=10").await;
    assert!(!suggested(&v).contains(&"killary".to_string()));
    let (_, lex) = get(&app, "/lexicon").await;
    assert_eq!(lex["rejected"], json!(["killary"]));
}

#[tokio::test]
async fn unknown_phrases_return_not_found_with_candidates() {
    let dir = alias_workspace();
    let app = app(dir.path());
    let (s, v) = get(&app, "/lexicon/suggest?q=hillarry").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["query"], json!("hillarry"));
    let candidates: Vec<&str> = v["candidates"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    assert!(candidates.contains(&"hillary"), "{candidates:?}");

    let (s, v) = post(&app, "/lexicon/accept", json!({ "phrase": "hillarry", "dimensions": ["foes"] })).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert!(v["candidates"].as_array().unwrap().iter().any(|c| c == "hillary"), "{v}");
}

#[tokio::test]
async fn annotation_endpoints_enforce_the_pending_item() {
    let dir = alias_workspace();
    let app = app(dir.path());
    let corpus = corpus(dir.path());
    let (s, first) = get(&app, "/annotate/next").await;
    assert_eq!(s, StatusCode::OK);
    let (_, again) = get(&app, "/annotate/next").await;
    assert_eq!(first["comment_id"], again["comment_id"]);
    assert_eq!(first["labeled"], json!(0));
    let id = first["comment_id"].as_str().unwrap().to_string();

    let (s, _) = post(&app, "/annotate/label", json!({ "comment_id": id, "label": "sarcasm" })).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let other = corpus.comments().iter().map(|c| c.id.clone()).find(|c| *c != id).unwrap();
    let (s, _) = post(&app, "/annotate/label", json!({ "comment_id": other, "label": "neutral" })).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let label = oracle_label(&corpus.get(&id).unwrap().body).to_string();
    let (s, v) = post(&app, "/annotate/label", json!({ "comment_id": id, "label": label })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["labeled"], json!(1));
    let (s, _) = post(&app, "/annotate/label", json!({ "comment_id": id, "label": "neutral" })).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (_, next) = get(&app, "/annotate/next").await;
    let skipped = next["comment_id"].as_str().unwrap().to_string();
    assert_ne!(skipped, id);
    let (s, v) = post(&app, "/annotate/skip", json!({ "comment_id": skipped })).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["labeled"], json!(1));
    let (_, next) = get(&app, "/annotate/next").await;
    assert_ne!(next["comment_id"], json!(skipped));

    let (s, c) = get(&app, &format!("/comments/{id}")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(c["label"], json!(label));
    let (s, _) = get(&app, "/comments/nosuchid").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn metric_points_match_an_offline_replay_of_the_labels() {
    let dir = alias_workspace();
    let app = app(dir.path());
    let corpus = corpus(dir.path());
    label_many(&app, &corpus, 49).await;
    let (_, m) = get(&app, "/annotate/metrics").await;
    assert_eq!(m["metric_points"], json!(0));
    assert_eq!(m["eval_interval"], json!(50));
    label_many(&app, &corpus, 1).await;
    let (s, m) = get(&app, "/annotate/metrics").await;
    assert_eq!(s, StatusCode::OK, "{m}");
    assert_eq!(m["metric_points"], json!(1));
    assert_eq!(m["history"][0]["labels"], json!(50));

    let ws = Workspace::open(dir.path()).unwrap();
    let labels = LabeledSet::read(std::fs::read(dir.path().join("artifacts/labels_random.jsonl")).unwrap().as_slice())
        .unwrap();
    assert_eq!(labels.len(), 50);
    let stream: Vec<_> = labels.entries.iter().map(|e| (e.comment_id.clone(), e.label)).collect();
    let (ids, rows) = pipeline::pool_rows(&ws, "random").unwrap();
    let offline = ActiveSession::replay(ids, &rows, ws.config.annotate.active.clone(), &stream).unwrap();
    assert_eq!(m["history"], serde_json::to_value(offline.history()).unwrap());
}

#[tokio::test]
async fn journals_rebuild_sessions_in_a_fresh_workspace() {
    let dir = alias_workspace();
    let lex_app = app(dir.path());
    post(&lex_app, "/lexicon/accept", json!({ "phrase": "hillary", "dimensions": ["foes"] })).await;
    post(&lex_app, "/lexicon/accept", json!({ "phrase": "aliasa", "dimensions": ["expectations", "heroes"] })).await;
    post(&lex_app, "/lexicon/reject", json!({ "phrase": "killary" })).await;
    let (_, lexicon) = get(&lex_app, "/lexicon").await;

    let copy = tempfile::tempdir().unwrap();
    copy_dir(dir.path(), copy.path());
    let (_, replayed) = get(&app(copy.path()), "/lexicon").await;
    assert_eq!(replayed, lexicon);

    let ann = alias_workspace();
    let ann_app = app(ann.path());
    let corpus = corpus(ann.path());
    label_many(&ann_app, &corpus, 12).await;
    let (_, next) = get(&ann_app, "/annotate/next").await;
    post(&ann_app, "/annotate/skip", json!({ "comment_id": next["comment_id"] })).await;
    label_many(&ann_app, &corpus, 3).await;
    let (_, status) = get(&ann_app, "/annotate/next").await;

    let copy = tempfile::tempdir().unwrap();
    copy_dir(ann.path(), copy.path());
    let fresh = app(copy.path());
    let (_, replayed) = get(&fresh, "/annotate/next").await;
    assert_eq!(replayed, status);
    let before = std::fs::read(ann.path().join("artifacts/labels_random.jsonl")).unwrap();
    let after = std::fs::read(copy.path().join("artifacts/labels_random.jsonl")).unwrap();
    assert_eq!(before, after);
}

/// Leftmost-longest phrase matches by regular expression, one alternative
/// per phrase, longest first.
fn regex_spans(text: &str, phrases: &[String]) -> Vec<(usize, usize, String)> {
    let mut sorted = phrases.to_vec();
    sorted.sort_by_key(|p| std::cmp::Reverse(p.len()));
    let alts: Vec<String> =
        sorted.iter().map(|p| p.split(' ').map(regex::escape).collect::<Vec<_>>().join(r"[^\p{L}\p{N}]+")).collect();
    let re = Regex::new(&format!(r"(?i)\b(?:{})\b", alts.join("|"))).unwrap();
    re.find_iter(text)
        .map(|m| {
            let words: Vec<String> = m.as_str().to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(String::from).collect();
            (m.start(), m.end(), words.join(" "))
        })
        .collect()
}

#[tokio::test]
async fn comment_highlights_match_a_regex_oracle() {
    let dir = tempfile::tempdir().unwrap();
    threaded_inputs(dir.path());
    for step in PIPELINE {
        run_ok(dir.path(), &[step]);
    }
    let app = app(dir.path());
    let (_, lex) = get(&app, "/lexicon").await;
    let mut phrases: Vec<String> = Vec::new();
    for list in lex["dimensions"].as_object().unwrap().values() {
        for p in list.as_array().unwrap() {
            let p = p.as_str().unwrap().to_string();
            if !phrases.contains(&p) {
                phrases.push(p);
            }
        }
    }
    assert!(phrases.iter().any(|p| p.contains(' ')), "{phrases:?}");

    let corpus = corpus(dir.path());
    let mut spans = 0;
    let mut multiword = 0;
    let mut replies = 0;
    for c in corpus.comments() {
        let (s, v) = get(&app, &format!("/comments/{}", c.id)).await;
        assert_eq!(s, StatusCode::OK);
        let got: Vec<(usize, usize, String)> = v["spans"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| (s["start"].as_u64().unwrap() as usize, s["end"].as_u64().unwrap() as usize, s["phrase"].as_str().unwrap().to_string()))
            .collect();
        assert_eq!(got, regex_spans(&c.body, &phrases), "comment {}: {}", c.id, c.body);
        spans += got.len();
        multiword += got.iter().filter(|s| s.2.contains(' ')).count();
        match &c.parent_id {
            Some(p) => {
                assert_eq!(v["parent"]["id"], json!(p));
                replies += 1;
            }
            None => assert!(v["parent"].is_null()),
        }
    }
    assert!(spans > 0 && multiword > 0 && replies > 0, "{spans} spans, {multiword} multiword, {replies} replies");
}

#[tokio::test]
async fn reports_appear_once_written() {
    let dir = tempfile::tempdir().unwrap();
    threaded_inputs(dir.path());
    run_ok(dir.path(), &["ingest"]);
    let app = app(dir.path());
    for uri in ["/lexicon", "/lexicon/suggest", "/annotate/next", "/annotate/metrics"] {
        let (s, _) = get(&app, uri).await;
        assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE, "{uri}");
    }
    let (s, v) = get(&app, "/comments/c00001").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["spans"], json!([]));
    for step in &PIPELINE[1..] {
        run_ok(dir.path(), &[step]);
    }
    for kind in ["importance", "its", "tenure"] {
        let (s, _) = get(&app, &format!("/reports/{kind}")).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{kind}");
    }

    for pool in ["random", "biased"] {
        let f = common::pool_label_file(dir.path(), pool);
        run_ok(dir.path(), &["annotate", "--pool", pool, "--input", f.to_str().unwrap()]);
    }
    for step in DOWNSTREAM {
        run_ok(dir.path(), &[step]);
    }
    for kind in ["importance", "its", "tenure"] {
        let (s, v) = get(&app, &format!("/reports/{kind}")).await;
        assert_eq!(s, StatusCode::OK, "{kind}: {v}");
        assert_eq!(v["kind"], json!(kind));
        let on_disk = std::fs::read_to_string(dir.path().join(format!("artifacts/reports/{kind}.txt"))).unwrap();
        assert_eq!(v["text"], json!(on_disk));
        assert!(!v["data"].as_array().unwrap().is_empty(), "{kind}");
    }
    let (s, _) = get(&app, "/reports/weather").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}
