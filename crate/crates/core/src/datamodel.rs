//! Persistent domain types shared by every module.
//!
//! Signals are stored channel-major (`data[channel][sample]`) in microvolts.
//! Timestamps are epoch seconds carried as `f64` (millisecond precision is
//! preserved for any date this century).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the shipped MUSE 2 profile.
pub const MUSE2: &str = "muse2";
/// Identifier of the shipped Emotiv EPOC+ profile.
pub const EMOTIV_EPOC_PLUS: &str = "emotiv_epoc_plus";
/// Identifier of the shipped mBrainTrain Smartfones profile.
pub const SMARTFONES: &str = "smartfones";
/// Identifier of the shipped Neurable Enten profile.
pub const NEURABLE: &str = "neurable";

/// Channel labels of the public music-video dataset, in file order.
pub const PUBLIC_CHANNELS: [&str; 32] = [
    "Fp1", "AF3", "F3", "F7", "FC5", "FC1", "C3", "T7", "CP5", "CP1", "P3", "P7", "PO3", "O1",
    "Oz", "Pz", "Fp2", "AF4", "Fz", "F4", "F8", "FC6", "FC2", "Cz", "C4", "T8", "CP6", "CP2", "P4",
    "P8", "PO4", "O2",
];
pub const PUBLIC_SAMPLING_RATE_HZ: u32 = 128;
pub const PUBLIC_PARTICIPANTS: usize = 32;
pub const PUBLIC_TRIALS_PER_PARTICIPANT: usize = 40;

/// One device channel and the public-dataset channel standing in for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSubstitution {
    pub channel: String,
    pub public_channel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub display_name: String,
    pub channel_names: Vec<String>,
    pub sampling_rate_hz: u32,
    /// Occipital channels left out of feature extraction.
    pub excluded_channels: Vec<String>,
    /// Ordered; the order defines the channel order of general-model epochs.
    pub deap_substitution: Vec<ChannelSubstitution>,
}

impl DeviceProfile {
    /// Channels that contribute features, in recording order.
    pub fn included_channels(&self) -> Vec<String> {
        self.channel_names
            .iter()
            .filter(|c| !self.excluded_channels.contains(c))
            .cloned()
            .collect()
    }

    /// Device channels used by the general model, in substitution order.
    pub fn substitution_channels(&self) -> Vec<String> {
        self.deap_substitution
            .iter()
            .map(|s| s.channel.clone())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sampling_rate_hz == 0 {
            return Err(Error::InvalidInput(format!(
                "{}: sampling rate must be positive",
                self.device_id
            )));
        }
        for c in &self.excluded_channels {
            if !self.channel_names.contains(c) {
                return Err(Error::InvalidInput(format!(
                    "{}: excluded channel `{c}` not in channel list",
                    self.device_id
                )));
            }
        }
        let mut targets = Vec::new();
        for s in &self.deap_substitution {
            if !self.channel_names.contains(&s.channel) {
                return Err(Error::InvalidInput(format!(
                    "{}: substitution key `{}` not in channel list",
                    self.device_id, s.channel
                )));
            }
            if targets.contains(&&s.public_channel) {
                return Err(Error::InvalidInput(format!(
                    "{}: substitution target `{}` used twice",
                    self.device_id, s.public_channel
                )));
            }
            targets.push(&s.public_channel);
        }
        Ok(())
    }
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn substitutions(pairs: &[(&str, &str)]) -> Vec<ChannelSubstitution> {
    pairs
        .iter()
        .map(|(c, p)| ChannelSubstitution {
            channel: c.to_string(),
            public_channel: p.to_string(),
        })
        .collect()
}

/// The four shipped device profiles.
pub fn builtin_profiles() -> Vec<DeviceProfile> {
    let neurable_channels: Vec<String> = (1..=20).map(|i| i.to_string()).collect();
    vec![
        DeviceProfile {
            device_id: MUSE2.into(),
            display_name: "MUSE 2".into(),
            channel_names: labels(&["TP9", "AF7", "AF8", "TP10"]),
            sampling_rate_hz: 256,
            excluded_channels: vec![],
            deap_substitution: substitutions(&[
                ("TP9", "T7"),
                ("AF7", "F7"),
                ("AF8", "F8"),
                ("TP10", "T8"),
            ]),
        },
        DeviceProfile {
            device_id: EMOTIV_EPOC_PLUS.into(),
            display_name: "Emotiv EPOC+".into(),
            channel_names: labels(&[
                "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8",
                "AF4",
            ]),
            sampling_rate_hz: 128,
            excluded_channels: labels(&["O1", "O2"]),
            deap_substitution: substitutions(&[
                ("AF3", "AF3"),
                ("F7", "F7"),
                ("F3", "F3"),
                ("T7", "T7"),
                ("P7", "P7"),
                ("P8", "P8"),
                ("T8", "T8"),
                ("F4", "F4"),
                ("F8", "F8"),
                ("AF4", "AF4"),
            ]),
        },
        DeviceProfile {
            device_id: SMARTFONES.into(),
            display_name: "mBrainTrain Smartfones".into(),
            channel_names: labels(&[
                "L1", "L2", "L3", "L4", "R1", "R2", "R3", "R4", "C3", "C4", "Cz",
            ]),
            sampling_rate_hz: 500,
            excluded_channels: vec![],
            deap_substitution: substitutions(&[
                ("L2", "T7"),
                ("R2", "T8"),
                ("C3", "C3"),
                ("C4", "C4"),
                ("Cz", "Cz"),
            ]),
        },
        DeviceProfile {
            device_id: NEURABLE.into(),
            display_name: "Neurable Enten".into(),
            channel_names: neurable_channels,
            sampling_rate_hz: 500,
            excluded_channels: vec![],
            deap_substitution: substitutions(&[("16", "T7"), ("5", "T8")]),
        },
    ]
}

pub fn profile_by_id(device_id: &str) -> Result<DeviceProfile> {
    builtin_profiles()
        .into_iter()
        .find(|p| p.device_id == device_id)
        .ok_or_else(|| Error::UnknownProfile(device_id.to_string()))
}

/// Scalp side of an electrode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hemisphere {
    Left,
    Right,
    Midline,
}

/// Side of the head a channel sits on.
///
/// 10-20 labels follow the odd-left / even-right / `z`-midline rule.
/// Smartfones pads are prefixed `L`/`R`; Neurable sensors 1-10 sit at the
/// right ear and 11-20 at the left.
pub fn hemisphere_of(device_id: &str, label: &str) -> Hemisphere {
    if device_id == NEURABLE {
        if let Ok(n) = label.parse::<u32>() {
            return if n <= 10 {
                Hemisphere::Right
            } else {
                Hemisphere::Left
            };
        }
    }
    if device_id == SMARTFONES && label.len() == 2 {
        match label.as_bytes()[0] {
            b'L' => return Hemisphere::Left,
            b'R' => return Hemisphere::Right,
            _ => {}
        }
    }
    let last = label.chars().last().unwrap_or('z');
    if last.eq_ignore_ascii_case(&'z') {
        return Hemisphere::Midline;
    }
    match last.to_digit(10) {
        Some(d) if d % 2 == 1 => Hemisphere::Left,
        Some(_) => {
            // TP10 and similar two-digit even labels
            Hemisphere::Right
        }
        None => Hemisphere::Midline,
    }
}

/// A block of multichannel samples at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub channels: Vec<String>,
    pub sampling_rate_hz: f64,
    /// `data[channel][sample]`, microvolts.
    pub data: Vec<Vec<f64>>,
}

impl Epoch {
    pub fn new(channels: Vec<String>, sampling_rate_hz: f64, data: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                got: data.len(),
            });
        }
        let n = data.first().map_or(0, Vec::len);
        if data.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidInput(
                "channels have differing sample counts".into(),
            ));
        }
        if !(sampling_rate_hz > 0.0 && sampling_rate_hz.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "sampling rate {sampling_rate_hz} must be positive"
            )));
        }
        Ok(Self {
            channels,
            sampling_rate_hz,
            data,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate_hz
    }

    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .position(|c| c == label)
            .map(|i| self.data[i].as_slice())
    }

    /// Projection onto `labels`, in the given order.
    pub fn select_channels(&self, labels: &[String]) -> Result<Epoch> {
        let data = labels
            .iter()
            .map(|l| {
                self.channel(l)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::MissingChannel(l.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Epoch {
            channels: labels.to_vec(),
            sampling_rate_hz: self.sampling_rate_hz,
            data,
        })
    }

    /// Samples `[start, end)` of every channel.
    pub fn slice(&self, start: usize, end: usize) -> Epoch {
        Epoch {
            channels: self.channels.clone(),
            sampling_rate_hz: self.sampling_rate_hz,
            data: self.data.iter().map(|c| c[start..end].to_vec()).collect(),
        }
    }
}

/// A continuous device dump as parsed from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegRecording {
    pub device_id: String,
    pub start_time: f64,
    pub timestamps: Vec<f64>,
    pub signal: Epoch,
}

impl EegRecording {
    pub fn n_samples(&self) -> usize {
        self.timestamps.len()
    }

    /// Time just past the final sample.
    pub fn end_time(&self) -> f64 {
        self.timestamps.last().copied().unwrap_or(self.start_time)
            + 1.0 / self.signal.sampling_rate_hz
    }

    pub fn duration_s(&self) -> f64 {
        self.end_time() - self.start_time
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Song {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_uri: Option<String>,
}

impl Song {
    pub fn titled(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            artist: None,
            source_uri: None,
        }
    }
}

pub const REPORT_MIN: f64 = -5.0;
pub const REPORT_MAX: f64 = 5.0;

/// One song-listening unit: baseline, listening, self-report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub song: Song,
    pub play_ts: f64,
    pub stop_ts: f64,
    /// When absent, the previous trial's `stop_ts` (or the recording start
    /// for the first trial) is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_start_ts: Option<f64>,
    pub valence: f64,
    pub arousal: f64,
}

impl Trial {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.play_ts, self.stop_ts, self.valence, self.arousal]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.baseline_start_ts.is_some_and(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("trial has non-finite fields".into()));
        }
        if self.play_ts >= self.stop_ts {
            return Err(Error::InvalidInput(format!(
                "trial `{}`: play_ts {} must precede stop_ts {}",
                self.song.title, self.play_ts, self.stop_ts
            )));
        }
        if self.baseline_start_ts.is_some_and(|b| b > self.play_ts) {
            return Err(Error::InvalidInput(format!(
                "trial `{}`: baseline starts after play",
                self.song.title
            )));
        }
        for (name, v) in [("valence", self.valence), ("arousal", self.arousal)] {
            if !(REPORT_MIN..=REPORT_MAX).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "trial `{}`: {name} {v} outside [-5, 5]",
                    self.song.title
                )));
            }
        }
        Ok(())
    }

    pub fn quadrant(&self) -> EmotionQuadrant {
        // validated trials always hold finite reports
        quadrant_of(self.valence, self.arousal).unwrap_or(EmotionQuadrant::NvNa)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub user_id: String,
    pub device_id: String,
    pub trials: Vec<Trial>,
    pub recording_ref: String,
}

impl SessionLog {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("session_id", &self.session_id),
            ("user_id", &self.user_id),
            ("device_id", &self.device_id),
        ] {
            if v.is_empty() || v.contains(['/', '\\']) || v.starts_with('.') {
                return Err(Error::InvalidInput(format!("invalid {name} `{v}`")));
            }
        }
        if self.trials.is_empty() {
            return Err(Error::InvalidInput(format!(
                "session {} has no trials",
                self.session_id
            )));
        }
        for t in &self.trials {
            t.validate()?;
        }
        for pair in self.trials.windows(2) {
            let next_start = pair[1].baseline_start_ts.unwrap_or(pair[1].play_ts);
            if next_start < pair[0].stop_ts {
                return Err(Error::InvalidInput(format!(
                    "session {}: trials overlap or are out of order",
                    self.session_id
                )));
            }
        }
        Ok(())
    }

    /// Start of the first trial (baseline included when recorded).
    pub fn start_ts(&self) -> f64 {
        self.trials
            .first()
            .map(|t| t.baseline_start_ts.unwrap_or(t.play_ts))
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 4] = [Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn definition(self) -> BandDefinition {
        match self {
            Band::Theta => BandDefinition::new(self, 4.0, 7.0),
            Band::Alpha => BandDefinition::new(self, 8.0, 13.0),
            Band::Beta => BandDefinition::new(self, 14.0, 30.0),
            Band::Gamma => BandDefinition::new(self, 31.0, 50.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandDefinition {
    pub band: Band,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl BandDefinition {
    const fn new(band: Band, lo_hz: f64, hi_hz: f64) -> Self {
        Self { band, lo_hz, hi_hz }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureDescriptor {
    pub channel: String,
    pub band: Band,
}

/// Band powers, channel-major and band-minor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub descriptors: Vec<FeatureDescriptor>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EmotionQuadrant {
    #[serde(rename = "PV_PA")]
    PvPa,
    #[serde(rename = "PV_NA")]
    PvNa,
    #[serde(rename = "NV_PA")]
    NvPa,
    #[serde(rename = "NV_NA")]
    NvNa,
}

impl EmotionQuadrant {
    pub const ALL: [EmotionQuadrant; 4] = [
        EmotionQuadrant::PvPa,
        EmotionQuadrant::PvNa,
        EmotionQuadrant::NvPa,
        EmotionQuadrant::NvNa,
    ];

    pub fn from_labels(positive_valence: bool, positive_arousal: bool) -> Self {
        match (positive_valence, positive_arousal) {
            (true, true) => EmotionQuadrant::PvPa,
            (true, false) => EmotionQuadrant::PvNa,
            (false, true) => EmotionQuadrant::NvPa,
            (false, false) => EmotionQuadrant::NvNa,
        }
    }

    pub fn positive_valence(self) -> bool {
        matches!(self, EmotionQuadrant::PvPa | EmotionQuadrant::PvNa)
    }

    pub fn positive_arousal(self) -> bool {
        matches!(self, EmotionQuadrant::PvPa | EmotionQuadrant::NvPa)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionQuadrant::PvPa => "PV_PA",
            EmotionQuadrant::PvNa => "PV_NA",
            EmotionQuadrant::NvPa => "NV_PA",
            EmotionQuadrant::NvNa => "NV_NA",
        }
    }
}

impl fmt::Display for EmotionQuadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionQuadrant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EmotionQuadrant::ALL
            .into_iter()
            .find(|q| q.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown quadrant `{s}`")))
    }
}

/// Quadrant from the signs of a valence/arousal pair. Zero counts as
/// negative.
pub fn quadrant_of(valence: f64, arousal: f64) -> Result<EmotionQuadrant> {
    if !valence.is_finite() || !arousal.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite report ({valence}, {arousal})"
        )));
    }
    Ok(EmotionQuadrant::from_labels(valence > 0.0, arousal > 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Valence,
    Arousal,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Valence, Target::Arousal];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Valence => "valence",
            Target::Arousal => "arousal",
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "valence" => Ok(Target::Valence),
            "arousal" => Ok(Target::Arousal),
            _ => Err(Error::InvalidInput(format!("unknown target `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Device,
    General,
}

impl Scope {
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Device => "device",
            Scope::General => "general",
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "device" => Ok(Scope::Device),
            "general" => Ok(Scope::General),
            _ => Err(Error::InvalidInput(format!("unknown scope `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    SelfCollected,
    Public,
}

/// A listening epoch with binary valence/arousal labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEpoch {
    pub epoch: Epoch,
    pub device_id: String,
    pub valence_label: bool,
    pub arousal_label: bool,
    pub origin: Origin,
}

impl LabeledEpoch {
    pub fn label(&self, target: Target) -> bool {
        match target {
            Target::Valence => self.valence_label,
            Target::Arousal => self.arousal_label,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemovalStep {
    pub removed_index: usize,
    pub score_after_removal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub train_acc: f64,
    pub test_acc: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Everything needed to classify one target from raw band powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub target: Target,
    pub scope: Scope,
    pub device_id: String,
    /// Device channels the model consumes, in order.
    pub input_channels: Vec<String>,
    /// Descriptors of the full (pre-selection) feature vector.
    pub feature_descriptors: Vec<FeatureDescriptor>,
    pub selected_indices: Vec<usize>,
    pub removal_trace: Vec<RemovalStep>,
    /// Standardization statistics over the selected features.
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub rbf_gamma: f64,
    pub regularization_c: f64,
    pub training_metrics: TrainingMetrics,
}
