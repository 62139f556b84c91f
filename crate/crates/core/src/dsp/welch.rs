//! Welch power spectral density: Hann-windowed 2 s segments with 50%
//! overlap, mean removed per segment, one-sided density in µV²/Hz.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const SEGMENT_SECONDS: f64 = 2.0;
pub const OVERLAP_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl Psd {
    pub fn resolution_hz(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }

    /// Trapezoidal integral of the density over bins whose centre lies in
    /// `[lo_hz, hi_hz]`.
    pub fn integrate(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let df = self.resolution_hz();
        let eps = 1e-9 * df.max(1.0);
        let inside: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo_hz - eps && **f <= hi_hz + eps)
            .map(|(_, p)| *p)
            .collect();
        inside.windows(2).map(|w| 0.5 * (w[0] + w[1]) * df).sum()
    }

    /// Integral over the whole one-sided spectrum.
    pub fn total_power(&self) -> f64 {
        self.integrate(0.0, f64::INFINITY)
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Segment length in samples for a sampling rate.
pub fn segment_len(fs_hz: f64) -> usize {
    (SEGMENT_SECONDS * fs_hz).round() as usize
}

pub fn psd(signal: &[f64], fs_hz: f64) -> Result<Psd> {
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::InvalidInput(format!("bad sampling rate {fs_hz}")));
    }
    let nperseg = segment_len(fs_hz);
    if nperseg < 2 || signal.len() < nperseg {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            required: nperseg.max(2),
        });
    }
    let hop = nperseg - (nperseg as f64 * OVERLAP_FRACTION).floor() as usize;
    let n_segments = (signal.len() - nperseg) / hop + 1;
    let window = hann(nperseg);
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::<f64>::new().plan_fft_forward(nperseg);
    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    for seg in 0..n_segments {
        let segment = &signal[seg * hop..seg * hop + nperseg];
        let mean = segment.iter().sum::<f64>() / nperseg as f64;
        for ((b, x), w) in buf.iter_mut().zip(segment).zip(&window) {
            *b = Complex::new((x - mean) * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
    }

    let scale = 1.0 / (fs_hz * window_power * n_segments as f64);
    let nyquist_bin = if nperseg.is_multiple_of(2) { Some(n_bins - 1) } else { None };
    let density = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
            p * scale * one_sided
        })
        .collect();
    let freqs = (0..n_bins)
        .map(|k| k as f64 * fs_hz / nperseg as f64)
        .collect();
    Ok(Psd { freqs, density })
}
