//! Seeded synthetic EEG with known emotion labels.
//!
//! Each channel is Gaussian noise shaped in the frequency domain to a 1/f
//! background with an alpha peak near 10 Hz and a low beta floor. Labels
//! are planted as spectral changes:
//!
//! * positive valence: 8–13 Hz power ×4 on right-hemisphere channels;
//!   negative valence: the same on the left. Midline channels carry none.
//! * positive arousal: 14–30 Hz power ×4 on every channel.
//!
//! A per-epoch gain and per-channel gains add nuisance variation.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::datamodel::{
    hemisphere_of, DeviceProfile, EegRecording, EmotionQuadrant, Epoch, Hemisphere, LabeledEpoch,
    Origin, SessionLog, Song, Trial, MUSE2, PUBLIC_PARTICIPANTS, PUBLIC_TRIALS_PER_PARTICIPANT,
};
use crate::error::{Error, Result};
use crate::ingest::{
    binarize_rating, participant_dir, save_recording, trial_file, write_public_labels, write_public_manifest,
    write_public_trial, write_session, PublicManifest, PublicRating, PUBLIC_DEVICE_ID,
};

pub const MIN_DURATION_S: f64 = 10.0;
/// Power factor of each planted signature (+6 dB).
pub const SIGNATURE_GAIN: f64 = 4.0;
pub const BASELINE_SECONDS: f64 = 2.0;
pub const REPORT_GAP_SECONDS: f64 = 1.0;
/// Listening length is drawn from this range.
pub const LISTENING_SECONDS: (f64, f64) = (10.0, 12.0);
pub const PUBLIC_TRIAL_SECONDS: f64 = 3.0;
/// 2024-01-01T00:00:00Z, first day of synthetic sessions.
pub const CORPUS_EPOCH_TS: f64 = 1_704_067_200.0;

const EPOCH_GAIN_SIGMA: f64 = 0.25;
const CHANNEL_GAIN_SIGMA: f64 = 0.15;

/// Background density in µV²/Hz.
fn background_psd(f: f64) -> f64 {
    let pink = 40.0 / f.max(1.0);
    let alpha = 12.0 * (-(f - 10.0).powi(2) / (2.0 * 1.5 * 1.5)).exp();
    let beta = if (15.0..=28.0).contains(&f) { 0.6 } else { 0.0 };
    pink + alpha + beta
}

/// Density of one channel for an optional planted quadrant.
pub fn channel_psd(f: f64, side: Hemisphere, quadrant: Option<EmotionQuadrant>) -> f64 {
    let mut s = background_psd(f);
    if let Some(q) = quadrant {
        let boosted = if q.positive_valence() {
            Hemisphere::Right
        } else {
            Hemisphere::Left
        };
        if side == boosted && (8.0..=13.0).contains(&f) {
            s *= SIGNATURE_GAIN;
        }
        if q.positive_arousal() && (14.0..=30.0).contains(&f) {
            s *= SIGNATURE_GAIN;
        }
    }
    s
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Real Gaussian noise of length `n` with one-sided density `density(f)`.
fn shaped_noise(n: usize, fs_hz: f64, density: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for k in 1..n.div_ceil(2) {
        let f = k as f64 * fs_hz / n as f64;
        let amp = (density(f) * fs_hz * n as f64 / 2.0).sqrt() / 2f64.sqrt();
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        spec[k] = Complex::new(amp * re, amp * im);
        spec[n - k] = spec[k].conj();
    }
    let ifft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    ifft.process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

/// Synthetic epoch of `n` samples; no duration limit.
pub fn synth_epoch(
    device_id: &str,
    channels: &[String],
    fs_hz: f64,
    n: usize,
    quadrant: Option<EmotionQuadrant>,
    rng: &mut ChaCha8Rng,
) -> Epoch {
    let epoch_gain = LogNormal::new(0.0, EPOCH_GAIN_SIGMA).expect("valid sigma").sample(rng);
    let channel_gain = LogNormal::new(0.0, CHANNEL_GAIN_SIGMA).expect("valid sigma");
    let data = channels
        .iter()
        .map(|label| {
            let side = hemisphere_of(device_id, label);
            let g = epoch_gain * channel_gain.sample(rng);
            shaped_noise(n, fs_hz, |f| channel_psd(f, side, quadrant), rng)
                .into_iter()
                .map(|v| v * g)
                .collect()
        })
        .collect();
    Epoch {
        channels: channels.to_vec(),
        sampling_rate_hz: fs_hz,
        data,
    }
}

/// One labeled synthetic epoch on every channel of `profile`.
pub fn generate_epoch(
    profile: &DeviceProfile,
    quadrant: EmotionQuadrant,
    duration_s: f64,
    seed: u64,
) -> Result<LabeledEpoch> {
    if !(duration_s >= MIN_DURATION_S) {
        return Err(Error::InvalidInput(format!(
            "duration {duration_s} s is below the {MIN_DURATION_S} s minimum"
        )));
    }
    let fs = profile.sampling_rate_hz as f64;
    let n = (duration_s * fs).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epoch = synth_epoch(
        &profile.device_id,
        &profile.channel_names,
        fs,
        n,
        Some(quadrant),
        &mut rng,
    );
    Ok(LabeledEpoch {
        epoch,
        device_id: profile.device_id.clone(),
        valence_label: quadrant.positive_valence(),
        arousal_label: quadrant.positive_arousal(),
        origin: Origin::SelfCollected,
    })
}

/// Corpus size, either per quadrant or in total (spread round-robin).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusSize {
    PerQuadrant(usize),
    Total(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusOptions {
    pub size: CorpusSize,
    pub seed: u64,
    pub users: usize,
}

impl CorpusOptions {
    pub fn per_quadrant(n: usize, seed: u64) -> Self {
        Self {
            size: CorpusSize::PerQuadrant(n),
            seed,
            users: 3,
        }
    }

    pub fn total(n: usize, seed: u64) -> Self {
        Self {
            size: CorpusSize::Total(n),
            seed,
            users: 3,
        }
    }
}

/// Sessions, their recordings (same order) and the listening epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub sessions: Vec<SessionLog>,
    pub recordings: Vec<EegRecording>,
    pub epochs: Vec<LabeledEpoch>,
}

const TITLES: [[&str; 6]; 4] = [
    ["Sunlit Parade", "Kite Season", "Brass Confetti", "Rooftop Sprint", "Neon Tide", "Spark Avenue"],
    ["Quiet Harbor", "Linen Morning", "Warm Tea Waltz", "Slow Meadow", "Porch Light", "Soft Focus"],
    ["Iron Rain", "Static Nerve", "Broken Siren", "Red Alarm", "Fault Line", "Glass Teeth"],
    ["Grey Window", "Long Winter", "Empty Platform", "Faded Letter", "Low Tide", "Dust Archive"],
];

fn quadrant_slot(q: EmotionQuadrant) -> usize {
    EmotionQuadrant::ALL.iter().position(|&x| x == q).unwrap_or(0)
}

/// Synthetic song name for a quadrant pool.
pub fn synthetic_song(q: EmotionQuadrant, pick: usize) -> Song {
    let pool = &TITLES[quadrant_slot(q)];
    Song {
        title: pool[pick % pool.len()].to_string(),
        artist: Some("Synth Ensemble".into()),
        source_uri: None,
    }
}

fn report(positive: bool, rng: &mut ChaCha8Rng) -> f64 {
    let magnitude = ((0.5 + 4.5 * rng.random::<f64>()) * 10.0).round() / 10.0;
    if positive {
        magnitude
    } else {
        -magnitude
    }
}

fn quadrant_plan(size: CorpusSize, rng: &mut ChaCha8Rng) -> Result<Vec<EmotionQuadrant>> {
    let mut plan: Vec<EmotionQuadrant> = match size {
        CorpusSize::PerQuadrant(n) if n >= 1 => EmotionQuadrant::ALL
            .iter()
            .flat_map(|&q| std::iter::repeat_n(q, n))
            .collect(),
        CorpusSize::Total(n) if n >= 1 => (0..n).map(|i| EmotionQuadrant::ALL[i % 4]).collect(),
        _ => return Err(Error::InvalidInput("corpus size must be at least 1".into())),
    };
    plan.shuffle(rng);
    Ok(plan)
}

/// Balanced corpus of multi-trial sessions for `profile`.
pub fn generate_corpus(profile: &DeviceProfile, opts: &CorpusOptions) -> Result<SyntheticCorpus> {
    let users = opts.users.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let plan = quadrant_plan(opts.size, &mut rng)?;
    let fs = profile.sampling_rate_hz as f64;
    let samples = |secs: f64| (secs * fs).round() as usize;

    // session sizes first, so generation can run per session in parallel
    let mut chunks = Vec::new();
    let mut at = 0;
    while at < plan.len() {
        let len = rng.random_range(3..=8).min(plan.len() - at);
        chunks.push((at, len));
        at += len;
    }
    let built: Vec<(SessionLog, EegRecording, Vec<LabeledEpoch>)> = chunks
        .par_iter()
        .enumerate()
        .map(|(k, &(first, len))| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64 + 1);
            let user = format!("user{}", k % users + 1);
            let day = (k / users) as f64;
            let hour = 8.0 + 3.0 * (k % users) as f64;
            let t0 = CORPUS_EPOCH_TS + day * 86_400.0 + hour * 3600.0 + rng.random_range(0..1800) as f64;
            let mut segments: Vec<Epoch> = Vec::new();
            let mut trials = Vec::new();
            let mut epochs = Vec::new();
            let mut cursor = 0usize;
            for &q in &plan[first..first + len] {
                let listen_s = rng.random_range(LISTENING_SECONDS.0..=LISTENING_SECONDS.1);
                let (nb, nl, ng) = (samples(BASELINE_SECONDS), samples(listen_s), samples(REPORT_GAP_SECONDS));
                let baseline = synth_epoch(&profile.device_id, &profile.channel_names, fs, nb, None, &mut rng);
                let listening = synth_epoch(&profile.device_id, &profile.channel_names, fs, nl, Some(q), &mut rng);
                let gap = synth_epoch(&profile.device_id, &profile.channel_names, fs, ng, None, &mut rng);
                let ts = |i: usize| t0 + i as f64 / fs;
                trials.push(Trial {
                    song: synthetic_song(q, rng.random_range(0..6)),
                    play_ts: ts(cursor + nb),
                    stop_ts: ts(cursor + nb + nl),
                    baseline_start_ts: Some(ts(cursor)),
                    valence: report(q.positive_valence(), &mut rng),
                    arousal: report(q.positive_arousal(), &mut rng),
                });
                epochs.push(LabeledEpoch {
                    epoch: listening.clone(),
                    device_id: profile.device_id.clone(),
                    valence_label: q.positive_valence(),
                    arousal_label: q.positive_arousal(),
                    origin: Origin::SelfCollected,
                });
                cursor += nb + nl + ng;
                segments.extend([baseline, listening, gap]);
            }
            let data = (0..profile.channel_names.len())
                .map(|c| segments.iter().flat_map(|s| s.data[c].iter().copied()).collect())
                .collect();
            let session_id = format!("{}-s{:04}", profile.device_id, k + 1);
            let recording = EegRecording {
                device_id: profile.device_id.clone(),
                start_time: t0,
                timestamps: (0..cursor).map(|i| t0 + i as f64 / fs).collect(),
                signal: Epoch {
                    channels: profile.channel_names.clone(),
                    sampling_rate_hz: fs,
                    data,
                },
            };
            let session = SessionLog {
                recording_ref: format!("{session_id}.csv"),
                session_id,
                user_id: user,
                device_id: profile.device_id.clone(),
                trials,
            };
            (session, recording, epochs)
        })
        .collect();

    let mut corpus = SyntheticCorpus {
        sessions: Vec::new(),
        recordings: Vec::new(),
        epochs: Vec::new(),
    };
    for (s, r, e) in built {
        corpus.sessions.push(s);
        corpus.recordings.push(r);
        corpus.epochs.extend(e);
    }
    Ok(corpus)
}

/// Report-only listening history (no recordings) for analytics fixtures.
/// Scores sit on a 0.5 grid and titles come from a small pool, so ties and
/// repeat listens are common.
pub fn random_history(user_id: &str, start_ts: f64, days: u32, sessions: usize, seed: u64) -> Vec<SessionLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let score = |rng: &mut ChaCha8Rng| rng.random_range(-10..=10) as f64 * 0.5;
    (0..sessions)
        .map(|k| {
            let day = rng.random_range(0..days.max(1)) as f64;
            let mut at = start_ts + day * 86_400.0 + rng.random_range(6 * 3600..22 * 3600) as f64;
            let trials = (0..rng.random_range(1..=6))
                .map(|_| {
                    let baseline = rng.random_bool(0.5).then_some(at);
                    let play = at + if baseline.is_some() { BASELINE_SECONDS } else { 0.0 };
                    let stop = play + rng.random_range(60..=300) as f64;
                    at = stop + rng.random_range(0..=30) as f64;
                    Trial {
                        song: Song::titled(format!("Song {:02}", rng.random_range(0..10))),
                        play_ts: play,
                        stop_ts: stop,
                        baseline_start_ts: baseline,
                        valence: score(&mut rng),
                        arousal: score(&mut rng),
                    }
                })
                .collect();
            SessionLog {
                session_id: format!("h{seed}-{k:03}"),
                user_id: user_id.to_string(),
                device_id: MUSE2.to_string(),
                trials,
                recording_ref: format!("h{seed}-{k:03}.csv"),
            }
        })
        .collect()
}

/// Writes `<session_id>.json` and `<session_id>.csv` for every session;
/// returns the session paths.
pub fn write_corpus(corpus: &SyntheticCorpus, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    corpus
        .sessions
        .par_iter()
        .zip(&corpus.recordings)
        .map(|(s, r)| {
            let json = dir.join(format!("{}.json", s.session_id));
            save_recording(dir.join(&s.recording_ref), r)?;
            write_session(&json, s)?;
            Ok(json)
        })
        .collect()
}

fn public_rating(positive: bool, rng: &mut ChaCha8Rng) -> f64 {
    let r = if positive {
        5.1 + 3.9 * rng.random::<f64>()
    } else {
        1.0 + 4.0 * rng.random::<f64>()
    };
    (r * 100.0).round() / 100.0
}

fn check_trial_seconds(trial_seconds: f64) -> Result<()> {
    if trial_seconds >= 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput("public trials must last at least 2 s".into()))
    }
}

/// Trials of public participant `p` (1-based) in trial order, with their
/// ratings. Ten trials per quadrant, shuffled.
pub fn public_participant(seed: u64, p: usize, trial_seconds: f64) -> Result<Vec<(Epoch, PublicRating)>> {
    check_trial_seconds(trial_seconds)?;
    let manifest = PublicManifest::default();
    let fs_hz = manifest.sampling_rate_hz as f64;
    let n = (trial_seconds * fs_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(p as u64);
    let mut plan: Vec<EmotionQuadrant> = (0..PUBLIC_TRIALS_PER_PARTICIPANT)
        .map(|i| EmotionQuadrant::ALL[i % 4])
        .collect();
    plan.shuffle(&mut rng);
    Ok(plan
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            // 10-20 labels, so hemisphere rules need no device id
            let epoch = synth_epoch("", &manifest.channels, fs_hz, n, Some(q), &mut rng);
            let rating = PublicRating {
                trial: i + 1,
                valence: public_rating(q.positive_valence(), &mut rng),
                arousal: public_rating(q.positive_arousal(), &mut rng),
            };
            (epoch, rating)
        })
        .collect())
}

/// The first `participants` participants of the fixture as labeled epochs,
/// without touching the filesystem. Samples are not rounded to the
/// three decimals the CSV files carry.
pub fn public_fixture_epochs(seed: u64, participants: usize, trial_seconds: f64) -> Result<Vec<LabeledEpoch>> {
    let per: Vec<Vec<(Epoch, PublicRating)>> = (1..=participants.min(PUBLIC_PARTICIPANTS))
        .into_par_iter()
        .map(|p| public_participant(seed, p, trial_seconds))
        .collect::<Result<_>>()?;
    Ok(per
        .into_iter()
        .flatten()
        .map(|(epoch, r)| LabeledEpoch {
            epoch,
            device_id: PUBLIC_DEVICE_ID.to_string(),
            valence_label: binarize_rating(r.valence),
            arousal_label: binarize_rating(r.arousal),
            origin: Origin::Public,
        })
        .collect())
}

/// Writes a public-layout tree (32 participants × 40 trials at 128 Hz,
/// ten trials per quadrant each) under `root`.
pub fn write_public_fixture(root: impl AsRef<Path>, seed: u64, trial_seconds: f64) -> Result<()> {
    let root = root.as_ref();
    check_trial_seconds(trial_seconds)?;
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    write_public_manifest(root, &PublicManifest::default())?;
    (1..=PUBLIC_PARTICIPANTS).into_par_iter().try_for_each(|p| {
        let dir = participant_dir(root, p);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let trials = public_participant(seed, p, trial_seconds)?;
        for (epoch, r) in &trials {
            write_public_trial(&trial_file(&dir, r.trial), epoch)?;
        }
        let ratings: Vec<PublicRating> = trials.into_iter().map(|(_, r)| r).collect();
        write_public_labels(&dir, &ratings)
    })
}
