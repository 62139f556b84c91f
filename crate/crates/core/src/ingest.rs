//! Device recordings, session logs and the public-dataset tree.
//!
//! Recording CSV: header `timestamp,<ch1>,...,<chN>` in profile order, one
//! row per sample, timestamps in epoch seconds, samples in microvolts.
//! Row numbers in errors are 0-based data-row indices (the header is not
//! counted).

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    profile_by_id, DeviceProfile, EegRecording, Epoch, LabeledEpoch, Origin, SessionLog, Trial,
    PUBLIC_CHANNELS, PUBLIC_PARTICIPANTS, PUBLIC_SAMPLING_RATE_HZ, PUBLIC_TRIALS_PER_PARTICIPANT,
};
use crate::error::{Error, Result};
use crate::store::{decode_document, encode_document, Store, TimeRange};

/// Shortest listening epoch accepted for feature extraction.
pub const MIN_LISTENING_SECONDS: f64 = 2.0;
/// Public ratings above this are the positive class.
pub const PUBLIC_RATING_THRESHOLD: f64 = 5.0;
pub const PUBLIC_MANIFEST: &str = "dataset.json";
/// Device id given to public epochs before channel mapping.
pub const PUBLIC_DEVICE_ID: &str = "public";

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{}: {other:?}", path.display())),
    }
}

fn read_header<R: Read>(rdr: &mut csv::Reader<R>, path: &Path) -> Result<Vec<String>> {
    Ok(rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect())
}

/// Columns of a headed numeric CSV, plus the header.
fn read_columns<R: Read>(input: R, path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv_reader(input);
    let header = read_header(&mut rdr, path)?;
    let mut columns = vec![Vec::new(); header.len()];
    for (row, record) in rdr.byte_records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != header.len() {
            return Err(Error::InvalidInput(format!(
                "{}: row {row} has {} fields, header has {}",
                path.display(),
                record.len(),
                header.len()
            )));
        }
        for ((col, field), name) in columns.iter_mut().zip(record.iter()).zip(&header) {
            match std::str::from_utf8(field).ok().and_then(|f| f.parse::<f64>().ok()) {
                Some(v) if v.is_finite() => col.push(v),
                _ => {
                    return Err(Error::NonFiniteSample {
                        row,
                        column: name.clone(),
                    })
                }
            }
        }
    }
    Ok((header, columns))
}

fn check_channel_header(found: &[String], profile: &DeviceProfile) -> Result<()> {
    if found == profile.channel_names.as_slice() {
        return Ok(());
    }
    let mut a = found.to_vec();
    let mut b = profile.channel_names.clone();
    a.sort();
    b.sort();
    if a == b {
        Err(Error::ChannelOrderMismatch {
            expected: profile.channel_names.clone(),
            found: found.to_vec(),
        })
    } else {
        Err(Error::HeaderMismatch(format!(
            "expected channels {:?} for {}, found {:?}",
            profile.channel_names, profile.device_id, found
        )))
    }
}

/// Parses a recording from any reader; `path` is used in messages only.
pub fn parse_recording_from<R: Read>(input: R, path: &Path, profile: &DeviceProfile) -> Result<EegRecording> {
    let (header, mut columns) = read_columns(input, path)?;
    if header.first().map(String::as_str) != Some("timestamp") {
        return Err(Error::HeaderMismatch(format!(
            "first column must be `timestamp`, found {:?}",
            header.first()
        )));
    }
    check_channel_header(&header[1..], profile)?;
    let timestamps = columns.remove(0);
    if timestamps.is_empty() {
        return Err(Error::InvalidInput(format!("{}: no samples", path.display())));
    }
    if let Some(row) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::NonMonotoneTimestamp { row: row + 1 });
    }
    let signal = Epoch::new(
        profile.channel_names.clone(),
        profile.sampling_rate_hz as f64,
        columns,
    )?;
    Ok(EegRecording {
        device_id: profile.device_id.clone(),
        start_time: timestamps[0],
        timestamps,
        signal,
    })
}

pub fn parse_recording(path: impl AsRef<Path>, profile: &DeviceProfile) -> Result<EegRecording> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_recording_from(std::io::BufReader::new(file), path, profile)
}

/// Writes a recording in the format `parse_recording` reads.
pub fn write_recording<W: Write>(out: W, rec: &EegRecording) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    write!(w, "timestamp")?;
    for c in &rec.signal.channels {
        write!(w, ",{c}")?;
    }
    writeln!(w)?;
    for (i, t) in rec.timestamps.iter().enumerate() {
        write!(w, "{t:.6}")?;
        for ch in &rec.signal.data {
            write!(w, ",{:.3}", ch[i])?;
        }
        writeln!(w)?;
    }
    w.flush()
}

pub fn save_recording(path: impl AsRef<Path>, rec: &EegRecording) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_recording(file, rec).map_err(|e| Error::io(path, e))
}

/// One trial cut out of its recording.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSegment {
    pub trial: Trial,
    /// `[baseline_start_ts, play_ts)`; `None` when that span is empty.
    pub baseline: Option<Epoch>,
    /// `[play_ts, stop_ts)`.
    pub listening: Epoch,
}

/// Index of the first sample at or after `t`.
fn sample_index(timestamps: &[f64], t: f64, slack: f64) -> usize {
    timestamps.partition_point(|&ts| ts < t - slack)
}

/// Cuts every trial of `session` out of `recording`.
pub fn segment_trials(recording: &EegRecording, session: &SessionLog) -> Result<Vec<TrialSegment>> {
    if recording.device_id != session.device_id {
        return Err(Error::ProfileMismatch {
            expected: session.device_id.clone(),
            got: recording.device_id.clone(),
        });
    }
    session.validate()?;
    let fs_hz = recording.signal.sampling_rate_hz;
    let slack = 0.25 / fs_hz;
    let start = recording.start_time;
    let end = recording.end_time();
    let mut out = Vec::with_capacity(session.trials.len());
    let mut previous_stop = start;
    for (i, trial) in session.trials.iter().enumerate() {
        let baseline_start = trial.baseline_start_ts.unwrap_or(previous_stop);
        if baseline_start < start - slack || trial.stop_ts > end + slack {
            return Err(Error::TrialOutOfRange { trial: i });
        }
        let b = sample_index(&recording.timestamps, baseline_start, slack);
        let p = sample_index(&recording.timestamps, trial.play_ts, slack);
        let s = sample_index(&recording.timestamps, trial.stop_ts, slack);
        let listening = recording.signal.slice(p, s);
        if listening.duration_s() < MIN_LISTENING_SECONDS {
            return Err(Error::EpochTooShort {
                seconds: listening.duration_s(),
                minimum: MIN_LISTENING_SECONDS,
            });
        }
        let baseline = (b < p).then(|| recording.signal.slice(b, p));
        out.push(TrialSegment {
            trial: trial.clone(),
            baseline,
            listening,
        });
        previous_stop = trial.stop_ts;
    }
    Ok(out)
}

/// Listening epochs labeled by the sign of each report (zero is negative).
pub fn labeled_epochs(segments: &[TrialSegment], device_id: &str) -> Vec<LabeledEpoch> {
    segments
        .iter()
        .map(|s| {
            let q = s.trial.quadrant();
            LabeledEpoch {
                epoch: s.listening.clone(),
                device_id: device_id.to_string(),
                valence_label: q.positive_valence(),
                arousal_label: q.positive_arousal(),
                origin: Origin::SelfCollected,
            }
        })
        .collect()
}

pub fn read_session(path: impl AsRef<Path>) -> Result<SessionLog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let session: SessionLog = decode_document(&text, path)?;
    session.validate()?;
    Ok(session)
}

pub fn write_session(path: impl AsRef<Path>, session: &SessionLog) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_document(session)?).map_err(|e| Error::io(path, e))
}

/// Where a session's `recording_ref` points, relative to the session file.
pub fn resolve_recording_ref(session_path: &Path, session: &SessionLog) -> PathBuf {
    let r = Path::new(&session.recording_ref);
    if r.is_absolute() {
        r.to_path_buf()
    } else {
        session_path.parent().unwrap_or(Path::new(".")).join(r)
    }
}

/// Reads a session document and its recording, and cuts the trials.
pub fn load_session_epochs(
    session_path: impl AsRef<Path>,
    profile: &DeviceProfile,
) -> Result<(SessionLog, Vec<TrialSegment>)> {
    let session_path = session_path.as_ref();
    let session = read_session(session_path)?;
    if session.device_id != profile.device_id {
        return Err(Error::ProfileMismatch {
            expected: profile.device_id.clone(),
            got: session.device_id.clone(),
        });
    }
    let rec = parse_recording(resolve_recording_ref(session_path, &session), profile)?;
    let segments = segment_trials(&rec, &session)?;
    Ok((session, segments))
}

/// Whether a filed session has its recording in the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingStatus {
    Stored,
    /// The session was filed without a recording; training skips it.
    Missing,
}

/// Files a session in the store. With a recording, the CSV is checked
/// against the device profile and the trial timestamps, copied into the
/// store, and the stored session points at the copy.
pub fn ingest_session(
    store: &Store,
    session: &SessionLog,
    recording: Option<&Path>,
) -> Result<(SessionLog, RecordingStatus)> {
    session.validate()?;
    let profile = profile_by_id(&session.device_id)?;
    if store.session_path(&session.user_id, &session.session_id).exists() {
        return Err(Error::AlreadyExists(format!(
            "session {}/{}",
            session.user_id, session.session_id
        )));
    }
    let mut stored = session.clone();
    let status = match recording {
        Some(path) => {
            let rec = parse_recording(path, &profile)?;
            segment_trials(&rec, session)?;
            store.put_recording(&session.user_id, &session.session_id, path)?;
            stored.recording_ref = format!("../recordings/{}.csv", session.session_id);
            RecordingStatus::Stored
        }
        None => RecordingStatus::Missing,
    };
    store.put_session(&stored)?;
    Ok((stored, status))
}

/// Labeled listening epochs of every stored session recorded on the
/// profile's device, across users. Sessions without a recording are
/// skipped.
pub fn device_epochs(store: &Store, profile: &DeviceProfile) -> Result<Vec<LabeledEpoch>> {
    let mut files = Vec::new();
    for user in store.list_users()? {
        for s in store.list_sessions(&user, TimeRange::all())? {
            if s.device_id != profile.device_id {
                continue;
            }
            let session_path = store.session_path(&user, &s.session_id);
            let recording = resolve_recording_ref(&session_path, &s);
            if recording.exists() {
                files.push((s, recording));
            }
        }
    }
    let per_session: Vec<Vec<LabeledEpoch>> = files
        .par_iter()
        .map(|(s, recording)| {
            let rec = parse_recording(recording, profile)?;
            Ok(labeled_epochs(&segment_trials(&rec, s)?, &profile.device_id))
        })
        .collect::<Result<_>>()?;
    Ok(per_session.into_iter().flatten().collect())
}

/// `dataset.json` at the root of a public-dataset tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicManifest {
    pub sampling_rate_hz: u32,
    pub channels: Vec<String>,
}

impl Default for PublicManifest {
    fn default() -> Self {
        Self {
            sampling_rate_hz: PUBLIC_SAMPLING_RATE_HZ,
            channels: PUBLIC_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// One row of `labels.csv`: 1-based trial number and 1–9 ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicRating {
    pub trial: usize,
    pub valence: f64,
    pub arousal: f64,
}

pub fn participant_dir(root: &Path, participant: usize) -> PathBuf {
    root.join(format!("p{participant:02}"))
}

pub fn trial_file(participant_dir: &Path, trial: usize) -> PathBuf {
    participant_dir.join(format!("trial{trial:02}.csv"))
}

pub fn binarize_rating(rating: f64) -> bool {
    rating > PUBLIC_RATING_THRESHOLD
}

fn shape_error(msg: String) -> Error {
    Error::DatasetShapeMismatch(msg)
}

fn read_labels(path: &Path) -> Result<Vec<PublicRating>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, columns) = read_columns(file, path)?;
    if header != ["trial", "valence", "arousal"] {
        return Err(Error::HeaderMismatch(format!(
            "{}: expected `trial,valence,arousal`, found {header:?}",
            path.display()
        )));
    }
    let mut ratings: Vec<PublicRating> = (0..columns[0].len())
        .map(|i| PublicRating {
            trial: columns[0][i] as usize,
            valence: columns[1][i],
            arousal: columns[2][i],
        })
        .collect();
    ratings.sort_by_key(|r| r.trial);
    Ok(ratings)
}

fn load_participant(root: &Path, p: usize, manifest: &PublicManifest) -> Result<Vec<LabeledEpoch>> {
    let dir = participant_dir(root, p);
    let ratings = read_labels(&dir.join("labels.csv"))?;
    let expected: Vec<usize> = (1..=PUBLIC_TRIALS_PER_PARTICIPANT).collect();
    let found: Vec<usize> = ratings.iter().map(|r| r.trial).collect();
    if found != expected {
        return Err(shape_error(format!(
            "participant {p}: labels list {} trials, expected {}",
            found.len(),
            PUBLIC_TRIALS_PER_PARTICIPANT
        )));
    }
    ratings
        .iter()
        .map(|r| {
            let path = trial_file(&dir, r.trial);
            let file = fs::File::open(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => {
                    shape_error(format!("missing trial file {}", path.display()))
                }
                _ => Error::io(&path, e),
            })?;
            let (header, columns) = read_columns(std::io::BufReader::new(file), &path)?;
            if header != manifest.channels {
                return Err(Error::HeaderMismatch(format!(
                    "{}: channel columns differ from the manifest",
                    path.display()
                )));
            }
            Ok(LabeledEpoch {
                epoch: Epoch::new(header, manifest.sampling_rate_hz as f64, columns)?,
                device_id: PUBLIC_DEVICE_ID.to_string(),
                valence_label: binarize_rating(r.valence),
                arousal_label: binarize_rating(r.arousal),
                origin: Origin::Public,
            })
        })
        .collect()
}

/// Loads the whole public tree (32 participants × 40 trials at 128 Hz).
pub fn load_public_dataset(root: impl AsRef<Path>) -> Result<Vec<LabeledEpoch>> {
    let root = root.as_ref();
    let manifest_path = root.join(PUBLIC_MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: PublicManifest = decode_document(&text, &manifest_path)?;
    if manifest.sampling_rate_hz != PUBLIC_SAMPLING_RATE_HZ {
        return Err(shape_error(format!(
            "sampling rate {} Hz, expected {PUBLIC_SAMPLING_RATE_HZ}",
            manifest.sampling_rate_hz
        )));
    }
    if manifest.channels.len() != PUBLIC_CHANNELS.len() {
        return Err(shape_error(format!(
            "{} channels, expected {}",
            manifest.channels.len(),
            PUBLIC_CHANNELS.len()
        )));
    }
    let mut participants = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let number = name.strip_prefix('p').and_then(|n| n.parse::<usize>().ok());
        if let (Some(n), true) = (number, entry.path().is_dir()) {
            participants.push(n);
        }
    }
    participants.sort_unstable();
    if participants != (1..=PUBLIC_PARTICIPANTS).collect::<Vec<_>>() {
        return Err(shape_error(format!(
            "found {} participant directories, expected p01..p{PUBLIC_PARTICIPANTS:02}",
            participants.len()
        )));
    }
    let per: Vec<Vec<LabeledEpoch>> = participants
        .par_iter()
        .map(|&p| load_participant(root, p, &manifest))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Writes `labels.csv` for one participant.
pub fn write_public_labels(dir: &Path, ratings: &[PublicRating]) -> Result<()> {
    let path = dir.join("labels.csv");
    let mut text = String::from("trial,valence,arousal\n");
    for r in ratings {
        text.push_str(&format!("{},{:.2},{:.2}\n", r.trial, r.valence, r.arousal));
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Writes one public trial (channel columns only).
pub fn write_public_trial(path: &Path, epoch: &Epoch) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", epoch.channels.join(",")).map_err(io)?;
    for i in 0..epoch.n_samples() {
        for (k, c) in epoch.data.iter().enumerate() {
            let sep = if k == 0 { "" } else { "," };
            write!(w, "{sep}{:.3}", c[i]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_public_manifest(root: &Path, manifest: &PublicManifest) -> Result<()> {
    let path = root.join(PUBLIC_MANIFEST);
    fs::write(&path, encode_document(manifest)?).map_err(|e| Error::io(&path, e))
}

/// Public epoch reduced to the profile's substitution channels, relabeled
/// with the device's channel names in substitution order.
pub fn map_channels(epoch: &LabeledEpoch, profile: &DeviceProfile) -> Result<LabeledEpoch> {
    let sources: Vec<String> = profile
        .deap_substitution
        .iter()
        .map(|s| s.public_channel.clone())
        .collect();
    let mut reduced = epoch.epoch.select_channels(&sources)?;
    reduced.channels = profile.substitution_channels();
    Ok(LabeledEpoch {
        epoch: reduced,
        device_id: profile.device_id.clone(),
        valence_label: epoch.valence_label,
        arousal_label: epoch.arousal_label,
        origin: epoch.origin,
    })
}

pub fn map_all(epochs: &[LabeledEpoch], profile: &DeviceProfile) -> Result<Vec<LabeledEpoch>> {
    epochs.iter().map(|e| map_channels(e, profile)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{profile_by_id, Song, EMOTIV_EPOC_PLUS, MUSE2, NEURABLE, SMARTFONES};

    fn muse_csv(rows: usize, header: &str, nan_row: Option<usize>) -> String {
        let mut s = format!("{header}\n");
        for i in 0..rows {
            let t = 1000.0 + i as f64 / 256.0;
            if Some(i) == nan_row {
                s.push_str(&format!("{t:.6},1.0,NaN,0.5,0.25\n"));
            } else {
                s.push_str(&format!("{t:.6},1.0,2.0,0.5,0.25\n"));
            }
        }
        s
    }

    fn parse(text: &str) -> Result<EegRecording> {
        let p = profile_by_id(MUSE2).unwrap();
        parse_recording_from(text.as_bytes(), Path::new("mem.csv"), &p)
    }

    #[test]
    fn recording_duration() {
        let rec = parse(&muse_csv(2560, "timestamp,TP9,AF7,AF8,TP10", None)).unwrap();
        assert_eq!(rec.n_samples(), 2560);
        assert!((rec.duration_s() - 10.0).abs() < 1e-6);
        assert_eq!(rec.signal.channel("AF7").unwrap()[5], 2.0);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(
            parse(&muse_csv(10, "timestamp,AF7,TP9,AF8,TP10", None)),
            Err(Error::ChannelOrderMismatch { .. })
        ));
        assert!(matches!(
            parse(&muse_csv(10, "timestamp,TP9,AF7,AF8,Cz", None)),
            Err(Error::HeaderMismatch(_))
        ));
        assert!(matches!(
            parse(&muse_csv(10, "time,TP9,AF7,AF8,TP10", None)),
            Err(Error::HeaderMismatch(_))
        ));
    }

    #[test]
    fn nan_row_reported() {
        match parse(&muse_csv(40, "timestamp,TP9,AF7,AF8,TP10", Some(17))) {
            Err(Error::NonFiniteSample { row, column }) => {
                assert_eq!(row, 17);
                assert_eq!(column, "AF7");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone() {
        let text = "timestamp,TP9,AF7,AF8,TP10\n1.0,0,0,0,0\n2.0,0,0,0,0\n2.0,0,0,0,0\n";
        assert!(matches!(
            parse(text),
            Err(Error::NonMonotoneTimestamp { row: 2 })
        ));
    }

    #[test]
    fn write_then_parse() {
        let rec = parse(&muse_csv(300, "timestamp,TP9,AF7,AF8,TP10", None)).unwrap();
        let mut buf = Vec::new();
        write_recording(&mut buf, &rec).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), rec);
    }

    fn ramp_recording(secs: f64) -> EegRecording {
        let p = profile_by_id(MUSE2).unwrap();
        let n = (secs * 256.0) as usize;
        let timestamps: Vec<f64> = (0..n).map(|i| i as f64 / 256.0).collect();
        let data = vec![(0..n).map(|i| i as f64).collect::<Vec<_>>(); 4];
        EegRecording {
            device_id: MUSE2.into(),
            start_time: 0.0,
            timestamps,
            signal: Epoch::new(p.channel_names, 256.0, data).unwrap(),
        }
    }

    fn trial(title: &str, base: Option<f64>, play: f64, stop: f64) -> Trial {
        Trial {
            song: Song::titled(title),
            play_ts: play,
            stop_ts: stop,
            baseline_start_ts: base,
            valence: 1.0,
            arousal: -1.0,
        }
    }

    fn session(trials: Vec<Trial>) -> SessionLog {
        SessionLog {
            session_id: "s1".into(),
            user_id: "u1".into(),
            device_id: MUSE2.into(),
            trials,
            recording_ref: "s1.csv".into(),
        }
    }

    #[test]
    fn listening_epoch_length() {
        let rec = ramp_recording(200.0);
        let segs = segment_trials(&rec, &session(vec![trial("a", None, 10.0, 190.0)])).unwrap();
        assert_eq!(segs[0].listening.n_samples(), 46080);
        assert_eq!(segs[0].listening.data[0][0], 2560.0);
        assert_eq!(segs[0].baseline.as_ref().unwrap().n_samples(), 2560);
    }

    #[test]
    fn contiguous_trials_disjoint() {
        let rec = ramp_recording(60.0);
        let s = session(vec![
            trial("a", Some(0.0), 2.0, 20.0),
            trial("b", Some(20.0), 22.0, 40.0),
        ]);
        let segs = segment_trials(&rec, &s).unwrap();
        let a_end = *segs[0].listening.data[0].last().unwrap();
        let b_start = segs[1].baseline.as_ref().unwrap().data[0][0];
        assert_eq!(b_start, a_end + 1.0);
        let labeled = labeled_epochs(&segs, MUSE2);
        assert!(labeled[0].valence_label && !labeled[0].arousal_label);
    }

    #[test]
    fn out_of_range_and_short() {
        let rec = ramp_recording(30.0);
        assert!(matches!(
            segment_trials(&rec, &session(vec![trial("a", None, 10.0, 31.0)])),
            Err(Error::TrialOutOfRange { trial: 0 })
        ));
        assert!(matches!(
            segment_trials(&rec, &session(vec![trial("a", None, 10.0, 11.5)])),
            Err(Error::EpochTooShort { .. })
        ));
    }

    #[test]
    fn rating_threshold() {
        assert!(!binarize_rating(5.0));
        assert!(binarize_rating(5.1));
    }

    fn public_epoch() -> LabeledEpoch {
        let data: Vec<Vec<f64>> = (0..32).map(|c| vec![c as f64; 8]).collect();
        LabeledEpoch {
            epoch: Epoch::new(PublicManifest::default().channels, 128.0, data).unwrap(),
            device_id: PUBLIC_DEVICE_ID.into(),
            valence_label: true,
            arousal_label: false,
            origin: Origin::Public,
        }
    }

    #[test]
    fn channel_mapping() {
        let e = public_epoch();
        let emotiv = map_channels(&e, &profile_by_id(EMOTIV_EPOC_PLUS).unwrap()).unwrap();
        assert_eq!(
            emotiv.epoch.channels,
            ["AF3", "F7", "F3", "T7", "P7", "P8", "T8", "F4", "F8", "AF4"]
        );
        let smart = map_channels(&e, &profile_by_id(SMARTFONES).unwrap()).unwrap();
        assert_eq!(smart.epoch.channels, ["L2", "R2", "C3", "C4", "Cz"]);
        let t7 = PUBLIC_CHANNELS.iter().position(|&c| c == "T7").unwrap();
        assert_eq!(smart.epoch.data[0], e.epoch.data[t7]);
        let neur = map_channels(&e, &profile_by_id(NEURABLE).unwrap()).unwrap();
        assert_eq!(neur.epoch.channels.len(), 2);
        assert_eq!(neur.origin, Origin::Public);
    }

    #[test]
    fn ingest_copies_and_checks() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("store")).unwrap();
        let csv = dir.path().join("rec.csv");
        save_recording(&csv, &ramp_recording(60.0)).unwrap();
        let s = session(vec![trial("a", Some(0.0), 2.0, 20.0), trial("b", None, 25.0, 40.0)]);

        let (stored, status) = ingest_session(&store, &s, Some(&csv)).unwrap();
        assert_eq!(status, RecordingStatus::Stored);
        assert_eq!(stored.recording_ref, "../recordings/s1.csv");
        assert_eq!(store.get_session("u1", "s1").unwrap(), stored);
        assert!(store.recording_path("u1", "s1").exists());
        assert!(matches!(ingest_session(&store, &s, Some(&csv)), Err(Error::AlreadyExists(_))));

        let epochs = device_epochs(&store, &profile_by_id(MUSE2).unwrap()).unwrap();
        assert_eq!(epochs.len(), 2);
        assert!(device_epochs(&store, &profile_by_id(NEURABLE).unwrap()).unwrap().is_empty());

        // trial past the end of the recording
        let mut late = session(vec![trial("c", None, 50.0, 70.0)]);
        late.session_id = "s2".into();
        assert!(matches!(ingest_session(&store, &late, Some(&csv)), Err(Error::TrialOutOfRange { .. })));
        assert!(!store.session_path("u1", "s2").exists());

        let (_, status) = ingest_session(&store, &late, None).unwrap();
        assert_eq!(status, RecordingStatus::Missing);
        assert_eq!(device_epochs(&store, &profile_by_id(MUSE2).unwrap()).unwrap().len(), 2);
    }
}
