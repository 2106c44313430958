//! Spectral balance: where the energy sits on a log-frequency axis and how
//! widely it is spread.

use super::dsp::{stft_magnitudes, STFT_HOP, STFT_WINDOW};
use super::{prepare, ProbeError};
use crate::audio::AudioBlock;

/// Bins below this carry window leakage from DC, not tone.
const MIN_FREQ: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralBalance {
    /// Power-weighted mean of log2(frequency / 1 Hz).
    pub centroid_log2: f64,
    /// Power-weighted standard deviation of log2 frequency, octaves.
    pub bandwidth_oct: f64,
}

impl SpectralBalance {
    pub fn centroid_hz(&self) -> f64 {
        self.centroid_log2.exp2()
    }
}

/// Centroid and spread of the time-averaged power spectrum.
pub fn estimate_spectral_balance(audio: &AudioBlock) -> Result<SpectralBalance, ProbeError> {
    let x = prepare(audio)?;
    let fs = audio.sample_rate as f64;
    let frames = stft_magnitudes(&x, STFT_WINDOW, STFT_HOP);
    let bin_hz = fs / STFT_WINDOW as f64;
    let mut power = vec![0.0; STFT_WINDOW / 2 + 1];
    for frame in &frames {
        for (p, m) in power.iter_mut().zip(frame) {
            *p += m * m;
        }
    }
    let k0 = (MIN_FREQ / bin_hz).ceil() as usize;
    let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (k, &p) in power.iter().enumerate().skip(k0) {
        let l = (k as f64 * bin_hz).log2();
        w += p;
        s1 += p * l;
        s2 += p * l * l;
    }
    if w <= 0.0 {
        return Err(ProbeError::NoSignal { rms_dbfs: f64::NEG_INFINITY });
    }
    let mean = s1 / w;
    let var = (s2 / w - mean * mean).max(0.0);
    Ok(SpectralBalance { centroid_log2: mean, bandwidth_oct: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn tones(freqs: &[(f64, f64)]) -> AudioBlock {
        let frames = (0..48_000)
            .map(|i| {
                let t = i as f64 / 48_000.0;
                freqs.iter().map(|(f, a)| a * (TAU * f * t).sin()).sum::<f64>() as f32
            })
            .collect();
        AudioBlock::new(48_000, frames)
    }

    #[test]
    fn single_tone_centroid() {
        let b = estimate_spectral_balance(&tones(&[(1000.0, 0.5)])).unwrap();
        assert!((b.centroid_hz() - 1000.0).abs() < 5.0, "{}", b.centroid_hz());
        assert!(b.bandwidth_oct < 0.02);
    }

    #[test]
    fn two_equal_tones_an_octave_apart() {
        let b = estimate_spectral_balance(&tones(&[(500.0, 0.3), (1000.0, 0.3)])).unwrap();
        assert!((b.centroid_log2 - (500f64.log2() + 0.5)).abs() < 0.01);
        assert!((b.bandwidth_oct - 0.5).abs() < 0.02, "{}", b.bandwidth_oct);
    }
}
