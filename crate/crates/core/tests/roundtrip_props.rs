use std::path::Path;

use eeglog_core::datamodel::{
    builtin_profiles, quadrant_of, Band, EegRecording, Epoch, FeatureDescriptor, FeatureVector, RemovalStep, Scope,
    SessionLog, Song, Target, TrainedModel, TrainingMetrics, Trial, PUBLIC_CHANNELS,
};
use eeglog_core::ingest::{parse_recording_from, write_recording};
use eeglog_core::store::{decode_document, encode_document, Store, TimeRange};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use serde::{de::DeserializeOwned, Serialize};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, any::<f64>().prop_filter("finite", |v| v.is_finite())]
}

fn label() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9_-]{0,11}"
}

fn song() -> impl Strategy<Value = Song> {
    (".{1,20}", prop::option::of(".{0,12}"), prop::option::of("[a-z]{1,8}://[a-z/]{0,16}")).prop_map(
        |(title, artist, source_uri)| Song {
            title,
            artist,
            source_uri,
        },
    )
}

fn session() -> impl Strategy<Value = SessionLog> {
    let trials = prop::collection::vec(
        (song(), 1.0f64..600.0, 0.0f64..60.0, prop::option::of(0.0f64..5.0), -5.0f64..=5.0, -5.0f64..=5.0),
        1..8,
    );
    (label(), label(), label(), 1.0e9f64..2.0e9, trials).prop_map(|(session_id, user_id, device_id, t0, specs)| {
        let mut at = t0;
        let trials = specs
            .into_iter()
            .map(|(song, listen, gap, baseline, valence, arousal)| {
                let baseline_start_ts = baseline.map(|_| at);
                let play_ts = at + baseline.unwrap_or(0.0);
                let stop_ts = play_ts + listen;
                at = stop_ts + gap;
                Trial {
                    song,
                    play_ts,
                    stop_ts,
                    baseline_start_ts,
                    valence,
                    arousal,
                }
            })
            .collect();
        SessionLog {
            recording_ref: format!("{session_id}.csv"),
            session_id,
            user_id,
            device_id,
            trials,
        }
    })
}

fn model() -> impl Strategy<Value = TrainedModel> {
    (1usize..6, 1usize..5, any::<bool>(), any::<bool>(), prop::collection::vec(finite(), 1..40)).prop_map(
        |(d, n_sv, valence, device, pool)| {
            let at = |i: usize| pool[i % pool.len()];
            TrainedModel {
                target: if valence { Target::Valence } else { Target::Arousal },
                scope: if device { Scope::Device } else { Scope::General },
                device_id: "muse2".into(),
                input_channels: vec!["TP9".into()],
                feature_descriptors: (0..d)
                    .map(|i| FeatureDescriptor {
                        channel: "TP9".into(),
                        band: Band::ALL[i % 4],
                    })
                    .collect(),
                selected_indices: (0..d).collect(),
                removal_trace: vec![RemovalStep {
                    removed_index: d,
                    score_after_removal: at(1).abs().min(1.0),
                }],
                feature_mean: (0..d).map(at).collect(),
                feature_std: (0..d).map(|i| at(i).abs() + 1.0).collect(),
                support_vectors: (0..n_sv).map(|s| (0..d).map(|i| at(s * d + i)).collect()).collect(),
                dual_coefficients: (0..n_sv).map(|s| at(s + 3)).collect(),
                bias: at(2),
                rbf_gamma: at(4).abs() + 1e-3,
                regularization_c: 1.0,
                training_metrics: TrainingMetrics {
                    train_acc: 0.5,
                    test_acc: 0.75,
                    n_train: 8,
                    n_test: 2,
                },
            }
        },
    )
}

fn round_trip<T: Serialize + DeserializeOwned>(value: &T) -> T {
    let text = encode_document(value).unwrap();
    decode_document(&text, Path::new("mem.json")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sessions_round_trip(s in session()) {
        s.validate().unwrap();
        prop_assert_eq!(round_trip(&s), s);
    }

    #[test]
    fn models_round_trip(m in model()) {
        prop_assert_eq!(round_trip(&m), m);
    }

    #[test]
    fn features_round_trip(values in prop::collection::vec(0.0f64..1e9, 0..24)) {
        let fv = FeatureVector {
            descriptors: values
                .iter()
                .enumerate()
                .map(|(i, _)| FeatureDescriptor { channel: format!("c{}", i / 4), band: Band::ALL[i % 4] })
                .collect(),
            values,
        };
        prop_assert_eq!(round_trip(&fv), fv);
    }

    #[test]
    fn profiles_round_trip(i in 0usize..4) {
        let p = builtin_profiles().swap_remove(i);
        prop_assert_eq!(round_trip(&p), p);
    }

    #[test]
    fn quadrant_ignores_positive_scale(v in finite(), a in finite(), c in 1e-3f64..1e3) {
        prop_assume!(v != 0.0 && a != 0.0);
        // scaling must not overflow or flush to zero
        prop_assume!([c * v, c * a].iter().all(|x| x.is_finite() && *x != 0.0));
        prop_assert_eq!(quadrant_of(v, a).unwrap(), quadrant_of(c * v, c * a).unwrap());
    }

    #[test]
    fn recording_csv_round_trip(n in 1usize..300, t0 in 1.0e9f64..2.0e9, seed in prop::collection::vec(-500.0f64..500.0, 4)) {
        let p = builtin_profiles().swap_remove(0);
        let fs = p.sampling_rate_hz as f64;
        let data: Vec<Vec<f64>> = seed.iter().map(|s| (0..n).map(|i| s + (i as f64 * 0.37).sin() * 40.0).collect()).collect();
        let rec = EegRecording {
            device_id: p.device_id.clone(),
            start_time: t0,
            timestamps: (0..n).map(|i| t0 + i as f64 / fs).collect(),
            signal: Epoch::new(p.channel_names.clone(), fs, data).unwrap(),
        };
        let mut buf = Vec::new();
        write_recording(&mut buf, &rec).unwrap();
        let back = parse_recording_from(buf.as_slice(), Path::new("mem.csv"), &p).unwrap();
        prop_assert_eq!(back.n_samples(), n);
        for (a, b) in rec.timestamps.iter().zip(&back.timestamps) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
        for (ca, cb) in rec.signal.data.iter().zip(&back.signal.data) {
            for (a, b) in ca.iter().zip(cb) {
                prop_assert!((a - b).abs() <= 5e-4);
            }
        }
    }
}

#[test]
fn store_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path()).unwrap();
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut sessions = Vec::new();
    for i in 0..10 {
        let mut s = session().new_tree(&mut runner).unwrap().current();
        s.user_id = "alice".into();
        s.session_id = format!("sess{i:02}");
        store.put_session(&s).unwrap();
        sessions.push(s);
    }
    sessions.sort_by(|a, b| a.start_ts().total_cmp(&b.start_ts()).then(a.session_id.cmp(&b.session_id)));
    let listed = store.list_sessions("alice", TimeRange::all()).unwrap();
    assert_eq!(listed.len(), sessions.len());
    for s in &sessions {
        assert_eq!(&store.get_session("alice", &s.session_id).unwrap(), s);
        assert!(listed.contains(s));
    }
}

#[test]
fn builtin_profile_table() {
    let counts: Vec<(String, usize, u32)> = builtin_profiles()
        .into_iter()
        .map(|p| (p.device_id.clone(), p.channel_names.len(), p.sampling_rate_hz))
        .collect();
    let expected = [("muse2", 4, 256), ("emotiv_epoc_plus", 14, 128), ("smartfones", 11, 500), ("neurable", 20, 500)];
    for ((id, n, fs), (eid, en, efs)) in counts.iter().zip(expected) {
        assert_eq!((id.as_str(), *n, *fs), (eid, en, efs));
    }
    for p in builtin_profiles() {
        p.validate().unwrap();
        for s in &p.deap_substitution {
            assert!(PUBLIC_CHANNELS.contains(&s.public_channel.as_str()), "{}", s.public_channel);
        }
    }
}
