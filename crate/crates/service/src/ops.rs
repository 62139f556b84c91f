//! Operations shared by the HTTP handlers and the command-line tool. Each
//! is a thin composition of engine calls over a store.

use std::path::Path;

use chrono::FixedOffset;
use serde::{Deserialize, Serialize};

use eeglog_core::analytics::{self, ActivitySeries, ActivitySummary, MemorialMoments, Period};
use eeglog_core::classifier::{
    predict, train_device_model, train_general_model, AccuracyReport, TrainOptions,
};
use eeglog_core::datamodel::{
    profile_by_id, EmotionQuadrant, Epoch, Scope, SessionLog, Target, TrainedModel,
};
use eeglog_core::dsp::channel_band_powers;
use eeglog_core::ingest::{
    device_epochs, load_public_dataset, map_all, parse_recording, resolve_recording_ref,
    segment_trials,
};
use eeglog_core::recommend::{recommend_playlist, Playlist};
use eeglog_core::store::Store;
use eeglog_core::{Error, Result};

/// Table-2 style outcome of training one device/scope pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub device_id: String,
    pub scope: Scope,
    #[serde(flatten)]
    pub accuracy: AccuracyReport,
    /// Feature dimension before selection.
    pub feature_dim: usize,
    pub valence_features: usize,
    pub arousal_features: usize,
    pub n_train: usize,
    pub n_test: usize,
}

impl TrainReport {
    pub fn from_models(valence: &TrainedModel, arousal: &TrainedModel) -> Self {
        Self {
            device_id: valence.device_id.clone(),
            scope: valence.scope,
            accuracy: AccuracyReport::from_models(valence, arousal),
            feature_dim: valence.feature_descriptors.len(),
            valence_features: valence.selected_indices.len(),
            arousal_features: arousal.selected_indices.len(),
            n_train: valence.training_metrics.n_train,
            n_test: valence.training_metrics.n_test,
        }
    }
}

/// Fits the valence and arousal models of one scope from the store's
/// sessions for `device_id`. Nothing is written.
pub fn fit_models(
    store: &Store,
    device_id: &str,
    scope: Scope,
    public_root: Option<&Path>,
    opts: &TrainOptions,
) -> Result<(TrainedModel, TrainedModel)> {
    let profile = profile_by_id(device_id)?;
    let own = device_epochs(store, &profile)?;
    let public = match scope {
        Scope::Device => Vec::new(),
        Scope::General => {
            let root = public_root.ok_or_else(|| {
                Error::InvalidInput("general models need a public dataset root".into())
            })?;
            map_all(&load_public_dataset(root)?, &profile)?
        }
    };
    let fit = |target| match scope {
        Scope::Device => train_device_model(&own, target, &profile, opts),
        Scope::General => train_general_model(&own, &public, target, &profile, opts),
    };
    Ok((fit(Target::Valence)?, fit(Target::Arousal)?))
}

pub fn save_models(store: &Store, pair: &(TrainedModel, TrainedModel)) -> Result<()> {
    store.put_model(&pair.0)?;
    store.put_model(&pair.1)
}

/// [`fit_models`] followed by [`save_models`].
pub fn train(
    store: &Store,
    device_id: &str,
    scope: Scope,
    public_root: Option<&Path>,
    opts: &TrainOptions,
) -> Result<(TrainedModel, TrainedModel)> {
    let pair = fit_models(store, device_id, scope, public_root, opts)?;
    save_models(store, &pair)?;
    Ok(pair)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPowers {
    pub channel: String,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Per-channel band powers of an epoch, after the band-pass.
pub fn channel_powers(epoch: &Epoch) -> Result<Vec<ChannelPowers>> {
    epoch
        .channels
        .iter()
        .zip(&epoch.data)
        .map(|(channel, signal)| {
            let p = channel_band_powers(signal, epoch.sampling_rate_hz)?;
            Ok(ChannelPowers {
                channel: channel.clone(),
                theta: p.theta,
                alpha: p.alpha,
                beta: p.beta,
                gamma: p.gamma,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeDetection {
    pub scope: Scope,
    pub valence_label: bool,
    pub arousal_label: bool,
    pub quadrant: EmotionQuadrant,
    pub valence_decision: f64,
    pub arousal_decision: f64,
}

/// Emotion detection for one epoch. The top-level labels come from the
/// device model when it exists, otherwise from the general model; `models`
/// lists every scope that has a trained pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub device_id: String,
    pub valence_label: bool,
    pub arousal_label: bool,
    pub quadrant: EmotionQuadrant,
    pub band_powers: Vec<ChannelPowers>,
    pub models: Vec<ScopeDetection>,
}

/// Loads the valence/arousal pair of one scope.
pub fn model_pair(store: &Store, device_id: &str, scope: Scope) -> Result<(TrainedModel, TrainedModel)> {
    Ok((
        store.get_model(device_id, scope, Target::Valence)?,
        store.get_model(device_id, scope, Target::Arousal)?,
    ))
}

pub fn detect_with(
    pair: &(TrainedModel, TrainedModel),
    device_id: &str,
    epoch: &Epoch,
) -> Result<ScopeDetection> {
    let v = predict(&pair.0, device_id, epoch)?;
    let a = predict(&pair.1, device_id, epoch)?;
    Ok(ScopeDetection {
        scope: pair.0.scope,
        valence_label: v.positive,
        arousal_label: a.positive,
        quadrant: EmotionQuadrant::from_labels(v.positive, a.positive),
        valence_decision: v.decision,
        arousal_decision: a.decision,
    })
}

pub fn detect(store: &Store, device_id: &str, epoch: &Epoch) -> Result<Detection> {
    let profile = profile_by_id(device_id)?;
    if epoch.sampling_rate_hz != profile.sampling_rate_hz as f64 {
        return Err(Error::InvalidInput(format!(
            "epoch sampled at {} Hz, {} records at {} Hz",
            epoch.sampling_rate_hz, device_id, profile.sampling_rate_hz
        )));
    }
    let mut models = Vec::new();
    for scope in [Scope::Device, Scope::General] {
        match model_pair(store, device_id, scope) {
            Ok(pair) => models.push(detect_with(&pair, device_id, epoch)?),
            Err(Error::NotFound(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let primary = models
        .first()
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("trained models for {device_id}")))?;
    Ok(Detection {
        device_id: device_id.to_string(),
        valence_label: primary.valence_label,
        arousal_label: primary.arousal_label,
        quadrant: primary.quadrant,
        band_powers: channel_powers(epoch)?,
        models,
    })
}

/// Listening epoch of a stored trial.
pub fn stored_trial_epoch(store: &Store, user: &str, session_id: &str, trial: usize) -> Result<(SessionLog, Epoch)> {
    let session = store.get_session(user, session_id)?;
    let profile = profile_by_id(&session.device_id)?;
    let recording = resolve_recording_ref(&store.session_path(user, session_id), &session);
    if !recording.exists() {
        return Err(Error::NotFound(format!("recording of session {user}/{session_id}")));
    }
    let rec = parse_recording(recording, &profile)?;
    let mut segments = segment_trials(&rec, &session)?;
    if trial >= segments.len() {
        return Err(Error::NotFound(format!("trial {trial} of session {session_id}")));
    }
    let epoch = segments.swap_remove(trial).listening;
    Ok((session, epoch))
}

pub fn summary(store: &Store, user: &str, week: &Period, tz: &FixedOffset) -> Result<ActivitySummary> {
    let Period::Week { year, week } = *week else {
        return Err(Error::InvalidInput(format!("`{week}` is not an ISO week (YYYY-Www)")));
    };
    analytics::weekly_activity(&store.user_sessions(user)?, year, week, tz)
}

pub fn activity(store: &Store, user: &str, period: &Period, dimension: Target, tz: &FixedOffset) -> Result<ActivitySeries> {
    Ok(analytics::activity_series(&store.user_sessions(user)?, period, dimension, tz))
}

pub fn moments(store: &Store, user: &str, month: &Period, tz: &FixedOffset) -> Result<MemorialMoments> {
    let Period::Month { year, month } = *month else {
        return Err(Error::InvalidInput(format!("`{month}` is not a month (YYYY-MM)")));
    };
    analytics::memorial_moments(&store.user_sessions(user)?, year, month, tz)
}

pub fn recommend(store: &Store, user: &str, quadrant: EmotionQuadrant, limit: usize) -> Result<Playlist> {
    recommend_playlist(quadrant, &store.user_sessions(user)?, limit)
}

/// Day of the user's latest report, used when a query names a span but no
/// date.
pub fn latest_day(store: &Store, user: &str, tz: &FixedOffset) -> Result<chrono::NaiveDate> {
    let sessions = store.user_sessions(user)?;
    let latest = sessions
        .iter()
        .flat_map(|s| &s.trials)
        .map(|t| t.play_ts)
        .fold(f64::NEG_INFINITY, f64::max);
    if latest.is_finite() {
        Ok(analytics::local_day(latest, tz))
    } else {
        Err(Error::NoData(format!("reports for user {user}")))
    }
}
