//! Filtering, spectral estimation and band-power features.
//!
//! The feature pipeline is: zero-phase 2–50 Hz band-pass per channel, Welch
//! PSD, trapezoidal integration over the theta, alpha, beta and gamma bands.
//! Features are laid out channel-major, band-minor.

mod filter;
mod welch;

use serde::{Deserialize, Serialize};

pub use filter::{bandpass, min_bandpass_len, Biquad, SosFilter, BANDPASS_HI_HZ, BANDPASS_LO_HZ, EDGE_ORDER};
pub use welch::{hann, psd, segment_len, Psd, OVERLAP_FRACTION, SEGMENT_SECONDS};

use crate::datamodel::{Band, DeviceProfile, Epoch, FeatureDescriptor, FeatureVector};
use crate::error::{Error, Result};

/// Powers in theta, alpha, beta, gamma order (µV²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPowers {
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BandPowers {
    pub fn as_array(&self) -> [f64; 4] {
        [self.theta, self.alpha, self.beta, self.gamma]
    }

    pub fn get(&self, band: Band) -> f64 {
        match band {
            Band::Theta => self.theta,
            Band::Alpha => self.alpha,
            Band::Beta => self.beta,
            Band::Gamma => self.gamma,
        }
    }

    pub fn total(&self) -> f64 {
        self.as_array().iter().sum()
    }
}

/// Band powers of a PSD.
pub fn powers_from_psd(p: &Psd) -> BandPowers {
    let power = |band: Band| {
        let d = band.definition();
        p.integrate(d.lo_hz, d.hi_hz)
    };
    BandPowers {
        theta: power(Band::Theta),
        alpha: power(Band::Alpha),
        beta: power(Band::Beta),
        gamma: power(Band::Gamma),
    }
}

/// Band powers of an (already filtered) signal. Delta is not computed.
pub fn band_powers(signal: &[f64], fs_hz: f64) -> Result<BandPowers> {
    Ok(powers_from_psd(&psd(signal, fs_hz)?))
}

/// Band-pass then band powers for a single channel.
pub fn channel_band_powers(signal: &[f64], fs_hz: f64) -> Result<BandPowers> {
    let filtered = bandpass(signal, fs_hz)?;
    band_powers(&filtered, fs_hz)
}

/// Per-channel band powers of every channel in `epoch`.
pub fn epoch_band_powers(epoch: &Epoch) -> Result<Vec<BandPowers>> {
    epoch
        .data
        .iter()
        .map(|ch| channel_band_powers(ch, epoch.sampling_rate_hz))
        .collect()
}

/// Features for `channels` (looked up by label in `epoch`), in that order.
pub fn extract_channel_features(epoch: &Epoch, channels: &[String]) -> Result<FeatureVector> {
    let mut values = Vec::with_capacity(4 * channels.len());
    let mut descriptors = Vec::with_capacity(4 * channels.len());
    for label in channels {
        let signal = epoch
            .channel(label)
            .ok_or_else(|| Error::MissingChannel(label.clone()))?;
        let powers = channel_band_powers(signal, epoch.sampling_rate_hz)?;
        for band in Band::ALL {
            values.push(powers.get(band));
            descriptors.push(FeatureDescriptor {
                channel: label.clone(),
                band,
            });
        }
    }
    Ok(FeatureVector {
        values,
        descriptors,
    })
}

/// Features over the profile's included channels.
///
/// `epoch` may carry either every profile channel (excluded ones are
/// dropped) or exactly the included ones.
pub fn extract_features(epoch: &Epoch, profile: &DeviceProfile) -> Result<FeatureVector> {
    let included = profile.included_channels();
    if epoch.channels != profile.channel_names && epoch.channels != included {
        return Err(Error::DimensionMismatch {
            expected: profile.channel_names.len(),
            got: epoch.channels.len(),
        });
    }
    extract_channel_features(epoch, &included)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::datamodel::{builtin_profiles, profile_by_id, EMOTIV_EPOC_PLUS, MUSE2};

    fn tone(freq: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn tone_lands_in_its_band() {
        let fs = 256.0;
        for (freq, band) in [
            (5.0, Band::Theta),
            (10.0, Band::Alpha),
            (20.0, Band::Beta),
            (40.0, Band::Gamma),
        ] {
            let bp = channel_band_powers(&tone(freq, fs, 10.0), fs).unwrap();
            let share = bp.get(band) / bp.total();
            assert!(share >= 0.95, "{freq} Hz: {share}");
        }
    }

    #[test]
    fn zero_signal_zero_powers() {
        let bp = band_powers(&vec![0.0; 2048], 256.0).unwrap();
        assert_eq!(bp.as_array(), [0.0; 4]);
    }

    #[test]
    fn feature_dimensions() {
        for p in builtin_profiles() {
            let fs = p.sampling_rate_hz as f64;
            let n = (fs * 4.0) as usize;
            let data = vec![vec![0.0; n]; p.channel_names.len()];
            let epoch = Epoch::new(p.channel_names.clone(), fs, data).unwrap();
            let fv = extract_features(&epoch, &p).unwrap();
            assert_eq!(fv.len(), 4 * p.included_channels().len());
            assert!(fv.values.iter().all(|&v| v == 0.0));
        }
        let emotiv = profile_by_id(EMOTIV_EPOC_PLUS).unwrap();
        assert_eq!(4 * emotiv.included_channels().len(), 48);
    }

    #[test]
    fn descriptor_order_is_channel_major() {
        let p = profile_by_id(MUSE2).unwrap();
        let epoch = Epoch::new(p.channel_names.clone(), 256.0, vec![vec![0.0; 1024]; 4]).unwrap();
        let fv = extract_features(&epoch, &p).unwrap();
        assert_eq!(fv.descriptors[0].channel, "TP9");
        assert_eq!(fv.descriptors[0].band, Band::Theta);
        assert_eq!(fv.descriptors[3].band, Band::Gamma);
        assert_eq!(fv.descriptors[4].channel, "AF7");
    }

    #[test]
    fn wrong_channel_count() {
        let p = profile_by_id(MUSE2).unwrap();
        let epoch = Epoch::new(vec!["TP9".into()], 256.0, vec![vec![0.0; 1024]]).unwrap();
        assert!(matches!(
            extract_features(&epoch, &p),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
