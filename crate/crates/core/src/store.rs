//! Local, file-based persistence.
//!
//! ```text
//! <root>/store.json                              format marker
//! <root>/users/<user>/index.json                 session index, time-ordered
//! <root>/users/<user>/sessions/<session>.json    one SessionLog each (append-only)
//! <root>/users/<user>/recordings/<session>.csv   recording copied on ingest
//! <root>/models/<device>/<scope>_<target>.json   last write wins
//! ```
//!
//! Every document carries `format_version`. Writes go to a temporary file
//! in the same directory and are renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Scope, SessionLog, Target, TrainedModel};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const VERSION_KEY: &str = "format_version";

#[derive(Serialize)]
struct Envelope<'a, T> {
    format_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with the format version as the first field.
pub fn encode_document<T: Serialize>(value: &T) -> Result<String> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        body: value,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(|e| Error::json("<memory>", e))?;
    text.push('\n');
    Ok(text)
}

/// Parses a document written by [`encode_document`], checking its version.
pub fn decode_document<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidInput(format!("{}: expected a JSON object", path.display())))?;
    match obj.remove(VERSION_KEY) {
        Some(serde_json::Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION as u64) => {}
        Some(other) => {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION.to_string(),
                found: other.to_string(),
            })
        }
        None => {
            return Err(Error::VersionMismatch {
                expected: FORMAT_VERSION.to_string(),
                found: "missing".into(),
            })
        }
    }
    serde_json::from_value(value).map_err(|e| Error::json(path, e))
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("doc");
    let tmp = dir.join(format!(
        ".{name}.tmp-{}-{}",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn read_document<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    match fs::read_to_string(path) {
        Ok(text) => decode_document(&text, path),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(what.to_string())),
        Err(e) => Err(Error::io(path, e)),
    }
}

/// Index entry for one stored session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub device_id: String,
    pub start_ts: f64,
    pub end_ts: f64,
}

impl SessionEntry {
    fn of(s: &SessionLog) -> Self {
        Self {
            session_id: s.session_id.clone(),
            device_id: s.device_id.clone(),
            start_ts: s.start_ts(),
            end_ts: s.trials.last().map_or(s.start_ts(), |t| t.stop_ts),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct SessionIndex {
    sessions: Vec<SessionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoreMarker {
    kind: String,
}

/// Half-open time range `[from, to)` in epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRange {
    pub from: f64,
    pub to: f64,
}

impl TimeRange {
    pub fn all() -> Self {
        Self {
            from: f64::NEG_INFINITY,
            to: f64::INFINITY,
        }
    }

    fn overlaps(&self, e: &SessionEntry) -> bool {
        e.end_ts >= self.from && e.start_ts < self.to
    }
}

fn check_key(kind: &str, key: &str) -> Result<()> {
    if key.is_empty() || key.contains(['/', '\\']) || key.starts_with('.') {
        return Err(Error::InvalidInput(format!("invalid {kind} `{key}`")));
    }
    Ok(())
}

/// Handle on a store directory. Writers are serialized by an internal
/// lock; readers only ever see renamed (complete) files.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    write_lock: Mutex<()>,
}

impl Store {
    /// Opens `root`, creating an empty store if the directory is new.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let marker = root.join("store.json");
        if marker.exists() {
            let m: StoreMarker = read_document(&marker, "store marker")?;
            if m.kind != "eeglog-store" {
                return Err(Error::InvalidInput(format!(
                    "{} is not an eeglog store",
                    root.display()
                )));
            }
        } else {
            let m = StoreMarker {
                kind: "eeglog-store".into(),
            };
            atomic_write(&marker, encode_document(&m)?.as_bytes())?;
        }
        Ok(Self {
            root,
            write_lock: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn user_dir(&self, user: &str) -> PathBuf {
        self.root.join("users").join(user)
    }

    /// Path of a stored session document.
    pub fn session_path(&self, user: &str, session_id: &str) -> PathBuf {
        self.user_dir(user)
            .join("sessions")
            .join(format!("{session_id}.json"))
    }

    pub fn recording_path(&self, user: &str, session_id: &str) -> PathBuf {
        self.user_dir(user)
            .join("recordings")
            .join(format!("{session_id}.csv"))
    }

    fn model_path(&self, device_id: &str, scope: Scope, target: Target) -> PathBuf {
        self.root
            .join("models")
            .join(device_id)
            .join(format!("{}_{}.json", scope.as_str(), target.as_str()))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, ()> {
        self.write_lock.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn read_index(&self, user: &str) -> Result<SessionIndex> {
        let path = self.user_dir(user).join("index.json");
        match read_document::<SessionIndex>(&path, "index") {
            Err(Error::NotFound(_)) => Ok(SessionIndex::default()),
            other => other,
        }
    }

    /// Stores a new session. Sessions are never overwritten.
    pub fn put_session(&self, session: &SessionLog) -> Result<()> {
        session.validate()?;
        let _guard = self.lock();
        let path = self.session_path(&session.user_id, &session.session_id);
        if path.exists() {
            return Err(Error::AlreadyExists(format!(
                "session {}/{}",
                session.user_id, session.session_id
            )));
        }
        atomic_write(&path, encode_document(session)?.as_bytes())?;
        let mut index = self.read_index(&session.user_id)?;
        index.sessions.push(SessionEntry::of(session));
        index.sessions.sort_by(|a, b| {
            a.start_ts
                .total_cmp(&b.start_ts)
                .then_with(|| a.session_id.cmp(&b.session_id))
        });
        let index_path = self.user_dir(&session.user_id).join("index.json");
        atomic_write(&index_path, encode_document(&index)?.as_bytes())
    }

    pub fn get_session(&self, user: &str, session_id: &str) -> Result<SessionLog> {
        check_key("user", user)?;
        check_key("session id", session_id)?;
        read_document(
            &self.session_path(user, session_id),
            &format!("session {user}/{session_id}"),
        )
    }

    /// Index entries overlapping `range`, ordered by start time.
    pub fn session_entries(&self, user: &str, range: TimeRange) -> Result<Vec<SessionEntry>> {
        check_key("user", user)?;
        Ok(self
            .read_index(user)?
            .sessions
            .into_iter()
            .filter(|e| range.overlaps(e))
            .collect())
    }

    /// Sessions overlapping `range`, ordered by start time.
    pub fn list_sessions(&self, user: &str, range: TimeRange) -> Result<Vec<SessionLog>> {
        self.session_entries(user, range)?
            .iter()
            .map(|e| self.get_session(user, &e.session_id))
            .collect()
    }

    pub fn has_user(&self, user: &str) -> bool {
        check_key("user", user).is_ok() && self.user_dir(user).join("index.json").exists()
    }

    /// Every session of a known user; `NotFound` for users with no data.
    pub fn user_sessions(&self, user: &str) -> Result<Vec<SessionLog>> {
        if !self.has_user(user) {
            return Err(Error::NotFound(format!("user {user}")));
        }
        self.list_sessions(user, TimeRange::all())
    }

    pub fn list_users(&self) -> Result<Vec<String>> {
        let dir = self.root.join("users");
        let mut users = Vec::new();
        match fs::read_dir(&dir) {
            Ok(entries) => {
                for entry in entries {
                    let entry = entry.map_err(|e| Error::io(&dir, e))?;
                    if entry.path().is_dir() {
                        users.push(entry.file_name().to_string_lossy().into_owned());
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(Error::io(&dir, e)),
        }
        users.sort();
        Ok(users)
    }

    /// Copies a recording CSV into the store next to its session.
    pub fn put_recording(&self, user: &str, session_id: &str, source: &Path) -> Result<PathBuf> {
        check_key("user", user)?;
        check_key("session id", session_id)?;
        let bytes = fs::read(source).map_err(|e| Error::io(source, e))?;
        let dest = self.recording_path(user, session_id);
        let _guard = self.lock();
        if dest.exists() {
            return Err(Error::AlreadyExists(format!("recording {user}/{session_id}")));
        }
        atomic_write(&dest, &bytes)?;
        Ok(dest)
    }

    pub fn put_model(&self, model: &TrainedModel) -> Result<()> {
        check_key("device", &model.device_id)?;
        let _guard = self.lock();
        let path = self.model_path(&model.device_id, model.scope, model.target);
        atomic_write(&path, encode_document(model)?.as_bytes())
    }

    pub fn get_model(&self, device_id: &str, scope: Scope, target: Target) -> Result<TrainedModel> {
        check_key("device", device_id)?;
        read_document(
            &self.model_path(device_id, scope, target),
            &format!("{} {} model for {device_id}", scope.as_str(), target.as_str()),
        )
    }

    /// `(device, scope, target)` of every stored model.
    pub fn list_models(&self) -> Result<Vec<(String, Scope, Target)>> {
        let dir = self.root.join("models");
        let mut out = Vec::new();
        let devices = match fs::read_dir(&dir) {
            Ok(d) => d,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        for device in devices {
            let device = device.map_err(|e| Error::io(&dir, e))?;
            let name = device.file_name().to_string_lossy().into_owned();
            for scope in [Scope::Device, Scope::General] {
                for target in Target::ALL {
                    if self.model_path(&name, scope, target).exists() {
                        out.push((name.clone(), scope, target));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}
