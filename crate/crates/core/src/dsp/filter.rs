//! Butterworth band-pass realized as cascaded biquads, applied forward and
//! backward for zero phase.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Lower corner of the analysis band.
pub const BANDPASS_LO_HZ: f64 = 2.0;
/// Upper corner of the analysis band.
pub const BANDPASS_HI_HZ: f64 = 50.0;
/// Butterworth order of each edge (high-pass and low-pass).
pub const EDGE_ORDER: usize = 6;

/// Direct-form II transposed second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// DC gain `H(1)`.
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// State that makes the section's response to a unit step start at
    /// steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z1 = self.b[2] - self.a[1] * g;
        let z0 = self.b[1] - self.a[0] * g + z1;
        [z0, z1]
    }

    fn run(&self, signal: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for x in signal.iter_mut() {
            let input = *x;
            let y = b0 * input + state[0];
            state[0] = b1 * input - a1 * y + state[1];
            state[1] = b2 * input - a2 * y;
            *x = y;
        }
    }

    /// Complex response magnitude at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = self.b[1] * s1 + self.b[2] * s2;
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = self.a[0] * s1 + self.a[1] * s2;
        ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Edge {
    HighPass,
    LowPass,
}

/// Even-order Butterworth edge as `order / 2` biquads (bilinear transform
/// with pre-warped cutoff).
fn butterworth_sections(edge: Edge, cutoff_hz: f64, fs_hz: f64, order: usize) -> Vec<Biquad> {
    debug_assert!(order.is_multiple_of(2) && order > 0);
    let k = (PI * cutoff_hz / fs_hz).tan();
    let k2 = k * k;
    (0..order / 2)
        .map(|i| {
            let theta = PI * (2 * i + 1) as f64 / (2 * order) as f64;
            let inv_q = 2.0 * theta.sin();
            let norm = 1.0 / (1.0 + k * inv_q + k2);
            let a = [2.0 * (k2 - 1.0) * norm, (1.0 - k * inv_q + k2) * norm];
            let b = match edge {
                Edge::LowPass => [k2 * norm, 2.0 * k2 * norm, k2 * norm],
                Edge::HighPass => [norm, -2.0 * norm, norm],
            };
            Biquad { b, a }
        })
        .collect()
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    /// Butterworth band-pass between `lo_hz` and `hi_hz`, `edge_order` poles
    /// on each side.
    pub fn butterworth_bandpass(lo_hz: f64, hi_hz: f64, fs_hz: f64, edge_order: usize) -> Self {
        let mut sections = butterworth_sections(Edge::HighPass, lo_hz, fs_hz, edge_order);
        sections.extend(butterworth_sections(Edge::LowPass, hi_hz, fs_hz, edge_order));
        Self { sections }
    }

    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    /// Magnitude response of one pass.
    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.magnitude(freq_hz, fs_hz))
            .product()
    }

    /// Per-section initial states for a unit-step steady state, scaled by
    /// the DC gain of the preceding sections.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let st = s.step_state();
                let out = [st[0] * scale, st[1] * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    fn run(&self, signal: &mut [f64], states: &[[f64; 2]], initial: f64) {
        for (section, state) in self.sections.iter().zip(states) {
            section.run(signal, [state[0] * initial, state[1] * initial]);
        }
    }

    /// Forward-backward filtering with mirror padding of `padlen` samples at
    /// both ends (edge sample not repeated).
    pub fn filtfilt(&self, signal: &[f64], padlen: usize) -> Vec<f64> {
        let n = signal.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|i| signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| signal[n - 1 - i]));

        let states = self.step_states();
        let x0 = ext[0];
        self.run(&mut ext, &states, x0);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, &states, y0);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

/// Minimum number of samples `bandpass` accepts.
pub fn min_bandpass_len() -> usize {
    3 * 2 * EDGE_ORDER
}

/// Zero-phase 2–50 Hz band-pass. Output has the input's length.
pub fn bandpass(signal: &[f64], fs_hz: f64) -> Result<Vec<f64>> {
    let nyquist_floor = 2.0 * BANDPASS_HI_HZ;
    if !(fs_hz > nyquist_floor) {
        return Err(Error::SamplingRateTooLow {
            fs_hz,
            minimum: nyquist_floor,
        });
    }
    let filter = SosFilter::butterworth_bandpass(BANDPASS_LO_HZ, BANDPASS_HI_HZ, fs_hz, EDGE_ORDER);
    let required = 3 * filter.order();
    if signal.len() < required {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            required,
        });
    }
    // Long enough for the high-pass ringing to die out inside the padding.
    let padlen = (3.0 * fs_hz / BANDPASS_LO_HZ).ceil() as usize;
    Ok(filter.filtfilt(signal, padlen.max(required)))
}
