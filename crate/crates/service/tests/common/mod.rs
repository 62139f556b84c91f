#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde::Serialize;
use serde_json::Value;
use tower::ServiceExt;

use eeglog_core::classifier::TrainOptions;
use eeglog_core::datamodel::{profile_by_id, Scope, SessionLog, MUSE2};
use eeglog_core::store::{encode_document, Store};
use eeglog_core::synthgen::{generate_corpus, random_history, write_corpus, CorpusOptions, CORPUS_EPOCH_TS};
use eeglog_service::{ingest_with_ref, ops, AppState, ServiceConfig};

pub const HISTORY_USER: &str = "alice";

/// Report-only history for [`HISTORY_USER`]: 60 sessions over 90 days
/// from 2024-01-01.
pub fn history() -> Vec<SessionLog> {
    random_history(HISTORY_USER, CORPUS_EPOCH_TS, 90, 60, 17)
}

/// MUSE 2 sessions with recordings written under `dir`, refs made absolute.
pub fn muse_sessions(dir: &Path, per_quadrant: usize) -> Vec<SessionLog> {
    let p = profile_by_id(MUSE2).unwrap();
    let corpus = generate_corpus(&p, &CorpusOptions::per_quadrant(per_quadrant, 5)).unwrap();
    write_corpus(&corpus, dir).unwrap();
    corpus
        .sessions
        .into_iter()
        .map(|mut s| {
            s.recording_ref = dir.join(&s.recording_ref).to_string_lossy().into_owned();
            s
        })
        .collect()
}

/// A store holding the history, the MUSE corpus and MUSE device models.
pub fn trained_state(root: &Path, corpus_dir: &Path) -> Arc<AppState> {
    let state = AppState::open(ServiceConfig::new(root)).unwrap();
    for s in history().iter().chain(&muse_sessions(corpus_dir, 40)) {
        ingest_with_ref(&state.store, s, Path::new("/")).unwrap();
    }
    ops::train(&state.store, MUSE2, Scope::Device, None, &TrainOptions::default()).unwrap();
    state
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

/// The document a successful response must carry for `value`.
pub fn expected_doc<T: Serialize>(value: &T) -> Value {
    serde_json::from_str(&encode_document(value).unwrap()).unwrap()
}

pub fn error_code(v: &Value) -> &str {
    v["error"]["code"].as_str().unwrap_or("")
}

pub fn open_twin(root: &Path) -> Store {
    Store::open(root).unwrap()
}
