use std::collections::HashSet;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use eeglog_core::analytics::{ActivitySummary, MemorialMoments};
use eeglog_core::recommend::Playlist;
use eeglog_core::store::decode_document;
use eeglog_core::ErrorCode;

fn eeglog(cwd: &Path, args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eeglog"));
    cmd.current_dir(cwd).args(args);
    for k in ["EEGLOG_DATA", "EEGLOG_CONFIG", "EEGLOG_PORT", "EEGLOG_TZ"] {
        cmd.env_remove(k);
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// A store with a report-only history for `alice`.
fn history_store(dir: &Path) {
    let o = eeglog(dir, &["synth", "history", "--user", "alice", "--seed", "5", "--out", "hist"], &[]);
    assert!(o.status.success());
    let mut files: Vec<_> = std::fs::read_dir(dir.join("hist")).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    for f in files {
        let o = eeglog(dir, &["--data", "store", "ingest", "--report-only", f.to_str().unwrap()], &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn json_output_is_a_valid_document() {
    let dir = tempfile::tempdir().unwrap();
    history_store(dir.path());
    let run = |args: &[&str]| {
        let mut all = vec!["--data", "store", "--json"];
        all.extend_from_slice(args);
        let o = eeglog(dir.path(), &all, &[]);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    let p = Path::new("<stdout>");
    let s: ActivitySummary = decode_document(&run(&["summary", "--user", "alice", "--period", "2024-W02"]), p).unwrap();
    assert!(s.n_reports > 0);
    let m: MemorialMoments = decode_document(&run(&["moments", "--user", "alice", "--period", "2024-01"]), p).unwrap();
    assert_eq!(m.month.to_string(), "2024-01");
    let r: Playlist = decode_document(&run(&["recommend", "--user", "alice", "--quadrant", "PV_PA", "--limit", "3"]), p).unwrap();
    assert!(r.songs.len() <= 3);
    let a: Value = serde_json::from_str(&run(&["activity", "--user", "alice", "--period", "month", "--dimension", "arousal"])).unwrap();
    assert_eq!(a["dimension"], "arousal");

    // text output
    let o = eeglog(dir.path(), &["--data", "store", "summary", "--user", "alice", "--period", "2024-W02"], &[]);
    assert!(stdout(&o).starts_with("2024-W02: "));
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    history_store(dir.path());
    let o = eeglog(dir.path(), &["--data", "store", "recommend", "--user", "nobody", "--quadrant", "NV_PA"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::NotFound.exit_code()));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NotFound"));

    let o = eeglog(dir.path(), &["--data", "store", "--json", "recommend", "--user", "nobody", "--quadrant", "NV_PA"], &[]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["format_version"].as_u64(), v["error"]["code"].as_str()), (Some(1), Some("NotFound")));

    let o = eeglog(dir.path(), &["--data", "store", "summary", "--user", "alice", "--period", "2024-W99"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::InvalidInput.exit_code()));
    let o = eeglog(dir.path(), &["--data", "store", "moments", "--user", "alice", "--period", "2030-01"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::NoData.exit_code()));
    let o = eeglog(dir.path(), &["--data", "store", "evaluate", "--device", "muse2"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::NotFound.exit_code()));
    let o = eeglog(dir.path(), &["--data", "store", "train", "--device", "nope"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::UnknownProfile.exit_code()));
    let o = eeglog(dir.path(), &["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = eeglog(dir.path(), &["--help"], &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn exit_codes_are_distinct() {
    let codes: HashSet<i32> = ErrorCode::ALL.iter().map(|c| c.exit_code()).collect();
    assert_eq!(codes.len(), ErrorCode::ALL.len());
    assert!(codes.iter().all(|&c| c > 1 && c < 256));
}

#[test]
fn train_and_evaluate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = eeglog(d, &["synth", "corpus", "--device", "muse2", "--per-quadrant", "30", "--seed", "3", "--out", "c"], &[]);
    assert!(o.status.success());
    let o = eeglog(d, &["--data", "s", "ingest", "--corpus", "c"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // one session by hand, with the recording passed explicitly
    let o = eeglog(d, &["--data", "s", "ingest", "c/muse2-s0001.csv", "c/muse2-s0001.json", "--device", "muse2"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::AlreadyExists.exit_code()));
    let o = eeglog(d, &["--data", "s2", "ingest", "c/muse2-s0001.csv", "c/muse2-s0001.json", "--device", "neurable"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::ProfileMismatch.exit_code()));

    let o = eeglog(d, &["--data", "s", "train", "--device", "muse2", "--scope", "device"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = eeglog(d, &["--data", "s", "evaluate", "--device", "muse2"], &[]);
    let text = stdout(&o);
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["device_id", "scope", "v_train", "v_test", "a_train", "a_test"]);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(&row[..2], ["muse2", "device"]);
    for cell in &row[2..] {
        let v: f64 = cell.parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn config_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = eeglog(d, &["synth", "history", "--user", "u", "--sessions", "1", "--out", "h"], &[]);
    assert!(o.status.success());
    let session = std::fs::read_dir(d.join("h")).unwrap().next().unwrap().unwrap().path();
    let session = session.to_str().unwrap();
    std::fs::write(d.join("eeglog.toml"), "data_dir = \"from-file\"\n").unwrap();

    // file beats the default
    assert!(eeglog(d, &["ingest", "--report-only", session], &[]).status.success());
    assert!(d.join("from-file/users/u").is_dir());
    // environment beats the file
    let env_dir = d.join("from-env");
    assert!(eeglog(d, &["ingest", "--report-only", session], &[("EEGLOG_DATA", &env_dir)]).status.success());
    assert!(env_dir.join("users/u").is_dir());
    // flag beats the environment
    let o = eeglog(d, &["--data", "from-flag", "ingest", "--report-only", session], &[("EEGLOG_DATA", &env_dir)]);
    assert!(o.status.success());
    assert!(d.join("from-flag/users/u").is_dir());

    // explicit config path and unknown keys
    std::fs::write(d.join("bad.toml"), "colour = \"blue\"\n").unwrap();
    let o = eeglog(d, &["--config", "bad.toml", "recommend", "--user", "u", "--quadrant", "PV_PA"], &[]);
    assert_eq!(o.status.code(), Some(ErrorCode::InvalidInput.exit_code()));
    // no config file at all: the default directory
    std::fs::remove_file(d.join("eeglog.toml")).unwrap();
    assert!(eeglog(d, &["ingest", "--report-only", session], &[]).status.success());
    assert!(d.join("eeglog-data/users/u").is_dir());
}
