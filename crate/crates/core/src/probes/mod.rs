//! Signal probes: measure the perceptual features of rendered audio without
//! access to the synthesizer's internal state, and decode a position back
//! from them.
//!
//! All estimators take at least one second of mono audio.

use thiserror::Error;

use crate::audio::AudioBlock;

mod am;
mod chroma;
mod decode;
pub mod dsp;
mod spectral;

pub use am::{envelope_autocorrelation, estimate_am, AmEstimate, BandFit, ModulationBand, COHERENT_FIT, MIN_CYCLES};
pub use chroma::estimate_chroma_rate;
pub use decode::{decode_position, Decoder, SpectralModel, ENVELOPE_SPREAD};
pub use spectral::{estimate_spectral_balance, SpectralBalance};

/// Shortest analysis span accepted by the probes.
pub const MIN_ANALYSIS_SECONDS: f64 = 1.0;
/// RMS below this is treated as silence.
pub const SILENCE_DBFS: f64 = -60.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbeError {
    #[error("audio too short: {seconds:.3} s (need at least {min} s)")]
    TooShort { seconds: f64, min: f64 },
    #[error("no signal: RMS {rms_dbfs:.1} dBFS")]
    NoSignal { rms_dbfs: f64 },
    #[error("both beat (depth {beat_depth:.3}) and roughness (depth {roughness_depth:.3}) modulation present")]
    Ambiguous { beat_depth: f64, roughness_depth: f64 },
}

/// Everything the probes measure over one analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureFrame {
    pub t_start: f64,
    pub t_end: f64,
    /// Octaves per second; positive is rising.
    pub chroma_rate: f64,
    /// Rate of the dominant amplitude modulation, Hz.
    pub am_rate: f64,
    pub am_depth: f64,
    pub modulation_band: ModulationBand,
    /// Log2 of the spectral centroid in Hz.
    pub spectral_centroid: f64,
    /// Spectral spread, octaves.
    pub envelope_bandwidth: f64,
}

/// Runs every probe over `audio`.
pub fn analyze(audio: &AudioBlock, t_start: f64) -> Result<FeatureFrame, ProbeError> {
    let chroma_rate = estimate_chroma_rate(audio)?;
    let am = estimate_am(audio)?;
    let spectral = estimate_spectral_balance(audio)?;
    Ok(FeatureFrame {
        t_start,
        t_end: t_start + audio.duration(),
        chroma_rate,
        am_rate: am.rate,
        am_depth: am.depth,
        modulation_band: am.band,
        spectral_centroid: spectral.centroid_log2,
        envelope_bandwidth: spectral.bandwidth_oct,
    })
}

/// Validates length and level; returns the samples as `f64`.
fn prepare(audio: &AudioBlock) -> Result<Vec<f64>, ProbeError> {
    let seconds = audio.duration();
    if audio.len() < audio.sample_rate as usize {
        return Err(ProbeError::TooShort { seconds, min: MIN_ANALYSIS_SECONDS });
    }
    let rms = audio.rms();
    let rms_dbfs = 20.0 * rms.max(1e-12).log10();
    if rms_dbfs < SILENCE_DBFS {
        return Err(ProbeError::NoSignal { rms_dbfs });
    }
    Ok(audio.frames.iter().map(|&s| s as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_short_and_silent() {
        let short = AudioBlock::new(48_000, vec![0.1; 47_999]);
        assert!(matches!(estimate_chroma_rate(&short), Err(ProbeError::TooShort { .. })));
        let silent = AudioBlock::silent(48_000, 48_000);
        assert!(matches!(estimate_am(&silent), Err(ProbeError::NoSignal { .. })));
        assert!(matches!(estimate_spectral_balance(&silent), Err(ProbeError::NoSignal { .. })));
    }
}
