//! Sliding-window detection over a pushed sample stream.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use eeglog_core::datamodel::{DeviceProfile, EmotionQuadrant, Epoch, TrainedModel};
use eeglog_core::{Error, ErrorCode, Result};

use crate::ops::{channel_powers, detect_with, ChannelPowers, ScopeDetection};

pub const WINDOW_SECONDS: f64 = 4.0;
pub const HOP_SECONDS: f64 = 1.0;
/// Largest tolerated spacing between consecutive samples.
pub const MAX_GAP_SECONDS: f64 = 1.0;

/// Client frame: one row of samples (profile channel order) per timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFrame {
    pub timestamps: Vec<f64>,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamMessage {
    Detection {
        window_start_ts: f64,
        window_end_ts: f64,
        quadrant: EmotionQuadrant,
        valence_label: bool,
        arousal_label: bool,
        band_powers: Vec<ChannelPowers>,
        models: Vec<ScopeDetection>,
    },
    /// The window was dropped; detections resume once it refills.
    StreamGap { last_ts: f64, resumed_ts: f64 },
    Error { code: ErrorCode, message: String },
}

impl StreamMessage {
    pub fn error(e: &Error) -> Self {
        StreamMessage::Error {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

pub struct StreamDetector {
    profile: DeviceProfile,
    /// Model pairs in preference order; the first drives the top-level
    /// labels.
    models: Vec<(TrainedModel, TrainedModel)>,
    window: usize,
    hop: usize,
    buffer: Vec<VecDeque<f64>>,
    timestamps: VecDeque<f64>,
    /// Samples since the last reset.
    seen: usize,
    last_ts: Option<f64>,
}

impl StreamDetector {
    pub fn new(profile: DeviceProfile, models: Vec<(TrainedModel, TrainedModel)>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::NotFound(format!("trained models for {}", profile.device_id)));
        }
        let fs = profile.sampling_rate_hz as f64;
        let window = (WINDOW_SECONDS * fs).round() as usize;
        let hop = (HOP_SECONDS * fs).round() as usize;
        let n_ch = profile.channel_names.len();
        Ok(Self {
            profile,
            models,
            window,
            hop,
            buffer: vec![VecDeque::with_capacity(window); n_ch],
            timestamps: VecDeque::with_capacity(window),
            seen: 0,
            last_ts: None,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    fn reset(&mut self) {
        self.buffer.iter_mut().for_each(VecDeque::clear);
        self.timestamps.clear();
        self.seen = 0;
    }

    /// Feeds a frame and returns the messages it triggers, in order.
    pub fn push(&mut self, frame: &SampleFrame) -> Result<Vec<StreamMessage>> {
        if frame.timestamps.len() != frame.samples.len() {
            return Err(Error::DimensionMismatch {
                expected: frame.timestamps.len(),
                got: frame.samples.len(),
            });
        }
        let n_ch = self.buffer.len();
        let mut out = Vec::new();
        for (row, (&ts, sample)) in frame.timestamps.iter().zip(&frame.samples).enumerate() {
            if sample.len() != n_ch {
                return Err(Error::DimensionMismatch {
                    expected: n_ch,
                    got: sample.len(),
                });
            }
            if let Some((col, _)) = sample.iter().enumerate().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFiniteSample {
                    row,
                    column: self.profile.channel_names[col].clone(),
                });
            }
            if !ts.is_finite() {
                return Err(Error::NonMonotoneTimestamp { row });
            }
            if let Some(last) = self.last_ts {
                if ts <= last {
                    return Err(Error::NonMonotoneTimestamp { row });
                }
                if ts - last > MAX_GAP_SECONDS {
                    self.reset();
                    out.push(StreamMessage::StreamGap {
                        last_ts: last,
                        resumed_ts: ts,
                    });
                }
            }
            self.last_ts = Some(ts);
            if self.timestamps.len() == self.window {
                self.timestamps.pop_front();
                self.buffer.iter_mut().for_each(|c| {
                    c.pop_front();
                });
            }
            self.timestamps.push_back(ts);
            for (c, &v) in self.buffer.iter_mut().zip(sample) {
                c.push_back(v);
            }
            self.seen += 1;
            if self.seen >= self.window && (self.seen - self.window).is_multiple_of(self.hop) {
                out.push(self.detect()?);
            }
        }
        Ok(out)
    }

    fn detect(&self) -> Result<StreamMessage> {
        let epoch = Epoch::new(
            self.profile.channel_names.clone(),
            self.profile.sampling_rate_hz as f64,
            self.buffer.iter().map(|c| c.iter().copied().collect()).collect(),
        )?;
        let models = self
            .models
            .iter()
            .map(|pair| detect_with(pair, &self.profile.device_id, &epoch))
            .collect::<Result<Vec<_>>>()?;
        let primary = &models[0];
        Ok(StreamMessage::Detection {
            window_start_ts: self.timestamps[0],
            window_end_ts: *self.timestamps.back().expect("full window"),
            quadrant: primary.quadrant,
            valence_label: primary.valence_label,
            arousal_label: primary.arousal_label,
            band_powers: channel_powers(&epoch)?,
            models,
        })
    }
}
