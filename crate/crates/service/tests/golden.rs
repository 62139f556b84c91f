//! Every endpoint against the matching direct call on a twin store.

mod common;

use std::path::Path;
use std::time::Instant;

use serde_json::{json, Value};

use common::*;
use eeglog_core::analytics::{utc, Period, Span};
use eeglog_core::classifier::TrainOptions;
use eeglog_core::datamodel::{profile_by_id, EmotionQuadrant, Epoch, Scope, Target, MUSE2};
use eeglog_core::store::encode_document;
use eeglog_core::synthgen::generate_epoch;
use eeglog_core::Result;
use eeglog_service::{detect_input, ingest_with_ref, ops, router, AppState, DetectRequest, ServiceConfig};

/// Compares an HTTP answer with a direct result, success or failure.
fn same<T: serde::Serialize>(what: &str, got: &(axum::http::StatusCode, Value), direct: Result<T>) {
    match direct {
        Ok(v) => {
            assert_eq!(got.0, 200, "{what}: {}", got.1);
            assert_eq!(got.1, expected_doc(&v), "{what}");
        }
        Err(e) => {
            assert_eq!(error_code(&got.1), e.code().as_str(), "{what}: {}", got.1);
            assert_eq!(got.0, eeglog_service::status_for(e.code()), "{what}");
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn endpoints_match_direct_calls() {
    let t = Instant::now();
    let dirs = [(); 3].map(|_| tempfile::tempdir().unwrap());
    let state = AppState::open(ServiceConfig::new(dirs[0].path())).unwrap();
    let app = router(state.clone());
    let twin = open_twin(dirs[1].path());
    let tz = utc();
    let mut n_requests = 0;

    // ingestion
    let sessions: Vec<_> = history().into_iter().chain(muse_sessions(dirs[2].path(), 40)).collect();
    for s in &sessions {
        let got = call(&app, "POST", "/api/v1/sessions", Some(encode_document(s).unwrap())).await;
        let base = std::env::current_dir().unwrap();
        same("ingest", &got, ingest_with_ref(&twin, s, &base));
        n_requests += 1;
    }
    assert_eq!(state.store.user_sessions(HISTORY_USER).unwrap(), twin.user_sessions(HISTORY_USER).unwrap());
    let again = call(&app, "POST", "/api/v1/sessions", Some(encode_document(&sessions[0]).unwrap())).await;
    assert_eq!((again.0.as_u16(), error_code(&again.1)), (409, "AlreadyExists"));

    // training
    let got = call(&app, "POST", "/api/v1/train", Some(json!({"device": MUSE2, "scope": "device"}).to_string())).await;
    let direct = ops::train(&twin, MUSE2, Scope::Device, None, &TrainOptions::default())
        .map(|(v, a)| ops::TrainReport::from_models(&v, &a));
    same("train", &got, direct);
    n_requests += 1;
    for k in ["v_train", "v_test", "a_train", "a_test"] {
        assert!(got.1[k].is_f64(), "missing {k}");
    }

    // analytics
    for week in ["2024-W01", "2024-W05", "2024-W09", "2024-W20"] {
        let got = call(&app, "GET", &format!("/api/v1/summary?user={HISTORY_USER}&week={week}"), None).await;
        same(week, &got, ops::summary(&twin, HISTORY_USER, &week.parse().unwrap(), &tz));
        n_requests += 1;
    }
    let plus2 = eeglog_core::analytics::parse_utc_offset("+02:00").unwrap();
    let got = call(&app, "GET", &format!("/api/v1/summary?user={HISTORY_USER}&week=2024-W05&tz=%2B02:00"), None).await;
    same("summary tz", &got, ops::summary(&twin, HISTORY_USER, &"2024-W05".parse().unwrap(), &plus2));

    for (span, period, dim) in [("day", "2024-01-15", "valence"), ("week", "2024-W07", "arousal"), ("month", "2024-03", "valence")] {
        let uri = format!("/api/v1/activity?user={HISTORY_USER}&span={span}&dimension={dim}&period={period}");
        let got = call(&app, "GET", &uri, None).await;
        let direct = ops::activity(&twin, HISTORY_USER, &period.parse().unwrap(), dim.parse::<Target>().unwrap(), &tz);
        same(&uri, &got, direct);
        n_requests += 1;
    }
    // no period: the span around the latest report
    let got = call(&app, "GET", &format!("/api/v1/activity?user={HISTORY_USER}&span=month&dimension=arousal"), None).await;
    let latest = ops::latest_day(&twin, HISTORY_USER, &tz).unwrap();
    let period = Period::containing(Span::Month, latest);
    same("activity latest", &got, ops::activity(&twin, HISTORY_USER, &period, Target::Arousal, &tz));
    n_requests += 1;

    for month in ["2024-01", "2024-02", "2024-03", "2024-06"] {
        let got = call(&app, "GET", &format!("/api/v1/moments?user={HISTORY_USER}&month={month}"), None).await;
        same(month, &got, ops::moments(&twin, HISTORY_USER, &month.parse().unwrap(), &tz));
        n_requests += 1;
        if month == "2024-01" {
            let highlights = ["max_valence", "min_valence", "max_arousal", "min_arousal"];
            assert!(highlights.iter().all(|h| got.1[h]["song"].is_object()), "{}", got.1);
        }
    }

    for q in EmotionQuadrant::ALL {
        let got = call(&app, "GET", &format!("/api/v1/recommend?user={HISTORY_USER}&quadrant={q}&limit=5"), None).await;
        same(q.as_str(), &got, ops::recommend(&twin, HISTORY_USER, q, 5));
        n_requests += 1;
    }
    let got = call(&app, "GET", "/api/v1/recommend?user=user1&quadrant=PV_NA", None).await;
    same("recommend default limit", &got, ops::recommend(&twin, "user1", EmotionQuadrant::PvNa, 10));
    n_requests += 1;

    // detection, inline and from a stored trial
    let p = profile_by_id(MUSE2).unwrap();
    let epoch = generate_epoch(&p, EmotionQuadrant::NvPa, 10.0, 77).unwrap().epoch;
    let body = json!({"device": MUSE2, "epoch": epoch}).to_string();
    let got = call(&app, "POST", "/api/v1/detect", Some(body)).await;
    same("detect inline", &got, ops::detect(&twin, MUSE2, &epoch));
    n_requests += 1;
    assert_eq!(got.1["band_powers"].as_array().unwrap().len(), 4);

    let body = json!({"user": "user2", "session_id": "muse2-s0002", "trial": 1}).to_string();
    let got = call(&app, "POST", "/api/v1/detect", Some(body.clone())).await;
    let req: DetectRequest = serde_json::from_str(&body).unwrap();
    let direct = detect_input(&twin, req).and_then(|(d, e)| ops::detect(&twin, &d, &e));
    same("detect stored", &got, direct);
    n_requests += 1;

    assert!(n_requests >= 20);
    println!("{n_requests} golden requests in {:?}", t.elapsed());
}

#[tokio::test]
async fn error_statuses() {
    let root = tempfile::tempdir().unwrap();
    let state = AppState::open(ServiceConfig::new(root.path())).unwrap();
    for s in history() {
        ingest_with_ref(&state.store, &s, Path::new("/")).unwrap();
    }
    let app = router(state);

    let got = call(&app, "GET", "/api/v1/recommend?user=nobody&quadrant=PV_PA", None).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (404, "NotFound"));
    assert_eq!(got.1["format_version"], 1);

    let got = call(&app, "GET", "/api/v1/moments?user=alice&month=2024-13", None).await;
    assert_eq!(got.0.as_u16(), 400);
    let got = call(&app, "GET", "/api/v1/moments?user=alice", None).await;
    assert_eq!(got.0.as_u16(), 400);
    let got = call(&app, "GET", "/api/v1/summary?user=alice&week=2024-03", None).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (400, "InvalidInput"));
    let got = call(&app, "GET", "/api/v1/moments?user=alice&month=2025-06", None).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (422, "NoData"));

    let got = call(&app, "POST", "/api/v1/train", Some(json!({"device": "nope", "scope": "device"}).to_string())).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (404, "UnknownProfile"));
    let got = call(&app, "POST", "/api/v1/train", Some("{not json".into())).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (400, "MalformedDocument"));
    let body = json!({"format_version": 7, "device": MUSE2, "scope": "device"}).to_string();
    let got = call(&app, "POST", "/api/v1/train", Some(body)).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (400, "VersionMismatch"));
    // only report-only sessions: nothing to train from
    let got = call(&app, "POST", "/api/v1/train", Some(json!({"device": MUSE2, "scope": "device"}).to_string())).await;
    assert_eq!(got.0.as_u16(), 422, "{}", got.1);
    let got = call(&app, "POST", "/api/v1/train", Some(json!({"device": MUSE2, "scope": "general"}).to_string())).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (400, "InvalidInput"));

    let p = profile_by_id(MUSE2).unwrap();
    let epoch = generate_epoch(&p, EmotionQuadrant::PvPa, 10.0, 1).unwrap().epoch;
    let got = call(&app, "POST", "/api/v1/detect", Some(json!({"device": MUSE2, "epoch": epoch}).to_string())).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (404, "NotFound"));
    let got = call(&app, "POST", "/api/v1/detect", Some(json!({"device": MUSE2}).to_string())).await;
    assert_eq!(got.0.as_u16(), 400);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn detect_and_recommend_edge_cases() {
    let dirs = [(); 2].map(|_| tempfile::tempdir().unwrap());
    let state = trained_state(dirs[0].path(), dirs[1].path());
    let app = router(state.clone());
    let p = profile_by_id(MUSE2).unwrap();

    // all-zero epoch
    let zero = Epoch::new(p.channel_names.clone(), 256.0, vec![vec![0.0; 2560]; 4]).unwrap();
    let got = call(&app, "POST", "/api/v1/detect", Some(json!({"device": MUSE2, "epoch": zero}).to_string())).await;
    assert_eq!((got.0.as_u16(), error_code(&got.1)), (422, "DegenerateSignal"));

    // wrong sampling rate
    let slow = Epoch::new(p.channel_names.clone(), 128.0, vec![vec![1.0; 1280]; 4]).unwrap();
    let got = call(&app, "POST", "/api/v1/detect", Some(json!({"device": MUSE2, "epoch": slow}).to_string())).await;
    assert_eq!(got.0.as_u16(), 400);

    // a user who only ever reported PV_PA has nothing for NV_PA
    let mut only_happy = history();
    only_happy.truncate(3);
    for (k, s) in only_happy.iter_mut().enumerate() {
        s.user_id = "bob".into();
        s.session_id = format!("b{k}");
        for t in &mut s.trials {
            t.valence = 2.0;
            t.arousal = 3.0;
        }
        ingest_with_ref(&state.store, s, Path::new("/")).unwrap();
    }
    let got = call(&app, "GET", "/api/v1/recommend?user=bob&quadrant=NV_PA&limit=3", None).await;
    assert_eq!(got.0.as_u16(), 200);
    assert_eq!(got.1["songs"], json!([]));
    assert_eq!(got.1["notice"], "NoMatch");
    let got = call(&app, "GET", "/api/v1/recommend?user=bob&quadrant=PV_PA&limit=0", None).await;
    assert_eq!(got.0.as_u16(), 400);

    let got = call(&app, "GET", "/api/v1/models", None).await;
    assert_eq!(got.1["models"].as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_training_of_one_key_conflicts() {
    let dirs = [(); 2].map(|_| tempfile::tempdir().unwrap());
    let state = trained_state(dirs[0].path(), dirs[1].path());
    let app = router(state);
    let body = json!({"device": MUSE2, "scope": "device", "seed": 3}).to_string();
    let first = {
        let (app, body) = (app.clone(), body.clone());
        tokio::spawn(async move { call(&app, "POST", "/api/v1/train", Some(body)).await })
    };
    tokio::time::sleep(std::time::Duration::from_millis(200)).await;
    let second = call(&app, "POST", "/api/v1/train", Some(body.clone())).await;
    assert_eq!((second.0.as_u16(), error_code(&second.1)), (409, "TrainingInProgress"));
    assert_eq!(first.await.unwrap().0.as_u16(), 200);
    // the key is free again
    let third = call(&app, "POST", "/api/v1/train", Some(body)).await;
    assert_eq!(third.0.as_u16(), 200);
}
