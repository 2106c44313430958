//! Audio → position: composes the three estimators and inverts the mapping.

use super::am::{estimate_am, BandFit, ModulationBand};
use super::chroma::estimate_chroma_rate;
use std::f64::consts::PI;

use super::dsp::golden_min;
use super::spectral::{estimate_spectral_balance, SpectralBalance};
use super::ProbeError;
use crate::audio::AudioBlock;
use crate::mapping::{invert_params, DisplacementVector, MappingConfig, SonificationParams};
use crate::synth::SynthConfig;

/// Both modulation bands this deep and coherent at once cannot come from
/// one position.
pub const AMBIGUITY_DEPTH: f64 = 0.1;
/// Beat depth at which the depth ramp is taken as saturated and the rate
/// becomes the better estimate of `y`.
const DEPTH_SATURATION: f64 = 0.95;

/// Forward model of the tone's time-averaged spectral balance.
///
/// Sums the power of every partial over a full chroma cycle, including the
/// sidebands that roughness modulation adds at `f ± rate`, and reduces it
/// the same way [`estimate_spectral_balance`] does. Decoding `z` is then a
/// one-dimensional fit of this model to the measurement, which keeps the
/// fullness estimate honest when roughness smears the spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralModel {
    pub synth: SynthConfig,
    pub brightness_shift: f64,
    pub fullness_widening: f64,
}

const MODEL_PHASES: usize = 24;
const MODEL_MIN_FREQ: f64 = 20.0;

impl SpectralModel {
    pub fn new(synth: &SynthConfig, mapping: &MappingConfig) -> Self {
        SpectralModel {
            synth: *synth,
            brightness_shift: mapping.brightness_octave_shift_max,
            fullness_widening: mapping.fullness_bandwidth_max,
        }
    }

    /// Predicted balance for a `z` coordinate and a roughness modulator.
    pub fn predict(&self, z: f64, roughness_depth: f64, roughness_rate: f64) -> SpectralBalance {
        let s = &self.synth;
        let fs = s.sample_rate as f64;
        let (brightness, fullness) = if z > 0.0 { (z, 0.0) } else { (0.0, -z) };
        let center = (s.envelope_center / s.base_frequency).log2() + brightness * self.brightness_shift;
        let half_width = s.envelope_width + fullness * self.fullness_widening;
        let (taper_lo, taper_hi) = (0.40 * fs, 0.45 * fs);
        let carrier = (1.0 - roughness_depth / 2.0).powi(2);
        let side = (roughness_depth / 4.0).powi(2);

        let (mut w, mut s1, mut s2) = (0.0, 0.0, 0.0);
        let mut add = |f: f64, p: f64| {
            if f >= MODEL_MIN_FREQ && f < fs / 2.0 && p > 0.0 {
                let l = f.log2();
                w += p;
                s1 += p * l;
                s2 += p * l * l;
            }
        };
        for i in 0..MODEL_PHASES {
            let phase = (i as f64 + 0.5) / MODEL_PHASES as f64;
            let mut amps = [0.0f64; 64];
            let n = s.partial_count.min(amps.len());
            let mut sum = 0.0;
            for (k, a) in amps.iter_mut().enumerate().take(n) {
                let oct = k as f64 + phase;
                let u = (oct - center) / half_width;
                let f = s.base_frequency * oct.exp2();
                *a = if u.abs() < 1.0 { 0.5 * (1.0 + (PI * u).cos()) } else { 0.0 };
                if f >= taper_lo {
                    *a *= ((taper_hi - f) / (taper_hi - taper_lo)).clamp(0.0, 1.0);
                }
                sum += *a;
            }
            if sum <= 0.0 {
                continue;
            }
            for (k, a) in amps.iter().enumerate().take(n) {
                let f = s.base_frequency * (k as f64 + phase).exp2();
                let p = (a / sum).powi(2);
                add(f, p * carrier);
                if side > 0.0 {
                    add(f + roughness_rate, p * side);
                    add((f - roughness_rate).abs(), p * side);
                }
            }
        }
        let mean = s1 / w;
        SpectralBalance { centroid_log2: mean, bandwidth_oct: (s2 / w - mean * mean).max(0.0).sqrt() }
    }

    /// The `z` whose prediction best matches `measured`.
    pub fn fit_z(&self, measured: &SpectralBalance, roughness_depth: f64, roughness_rate: f64) -> f64 {
        let cost = |z: f64| {
            let p = self.predict(z, roughness_depth, roughness_rate);
            let dc = (p.centroid_log2 - measured.centroid_log2) / self.brightness_shift;
            let db = (p.bandwidth_oct - measured.bandwidth_oct) / (ENVELOPE_SPREAD * self.fullness_widening);
            dc * dc + db * db
        };
        const STEPS: usize = 80;
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=STEPS {
            let z = -1.0 + 2.0 * i as f64 / STEPS as f64;
            let c = cost(z);
            if c < best.1 {
                best = (z, c);
            }
        }
        let step = 2.0 / STEPS as f64;
        // The model has a kink at z = 0, so refine each side separately.
        let refine = |lo: f64, hi: f64| {
            let z = golden_min(lo, hi, 1e-7, cost);
            (z, cost(z))
        };
        let (lo, hi) = ((best.0 - step).max(-1.0), (best.0 + step).min(1.0));
        let a = refine(lo, hi.min(0.0).max(lo));
        let b = refine(lo.max(0.0).min(hi), hi);
        if a.1 <= b.1 {
            a.0
        } else {
            b.0
        }
    }
}

/// Power-weighted standard deviation of log2 frequency under a raised-cosine
/// amplitude envelope, per octave of half-width: `sqrt(∫u²cos⁴ / ∫cos⁴)`
/// over `u ∈ [-1, 1]` with the envelope `cos²(πu/2)`.
pub const ENVELOPE_SPREAD: f64 = 0.282_896_4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decoder {
    pub mapping: MappingConfig,
    pub model: SpectralModel,
}

impl Decoder {
    pub fn new(mapping: MappingConfig, synth: &SynthConfig) -> Self {
        Decoder { model: SpectralModel::new(synth, &mapping), mapping }
    }

    /// Estimates the parameter frame that produced `audio`.
    pub fn decode_params(&self, audio: &AudioBlock) -> Result<SonificationParams, ProbeError> {
        let cfg = &self.mapping;
        let chroma = estimate_chroma_rate(audio)?;
        let am = estimate_am(audio)?;
        let balance = estimate_spectral_balance(audio)?;
        let coherent = |f: &BandFit| f.depth >= AMBIGUITY_DEPTH && f.coherent();
        if coherent(&am.beats) && coherent(&am.roughness) {
            return Err(ProbeError::Ambiguous { beat_depth: am.beats.depth, roughness_depth: am.roughness.depth });
        }

        let mut p =
            SonificationParams { chroma_velocity: chroma.clamp(-cfg.v_max, cfg.v_max), ..SonificationParams::NEUTRAL };
        match am.band {
            ModulationBand::Beats => {
                let depth = am.depth.min(1.0);
                p.beat_depth = depth;
                p.beat_rate = if depth < DEPTH_SATURATION {
                    // On the depth ramp |y| = depth * ramp; the rate is
                    // barely observable within one window there.
                    let y = depth * cfg.beat_depth_ramp;
                    cfg.beat_rate_max * y.powf(cfg.speed_exponent)
                } else {
                    am.rate.min(cfg.beat_rate_max)
                };
            }
            ModulationBand::Roughness => p.roughness_depth = am.depth.min(cfg.roughness_depth_max),
            ModulationBand::None => {}
        }

        let (rd, rr) = match am.band {
            ModulationBand::Roughness => (am.depth, am.rate),
            _ => (0.0, 0.0),
        };
        let z = self.model.fit_z(&balance, rd, rr);
        if z > 0.0 {
            p.brightness = z;
        } else {
            p.fullness = -z;
        }
        Ok(p)
    }

    pub fn decode(&self, audio: &AudioBlock) -> Result<DisplacementVector, ProbeError> {
        let p = self.decode_params(audio)?;
        // The params are clamped into their valid ranges above.
        Ok(invert_params(&p, &self.mapping).unwrap_or(DisplacementVector::ORIGIN))
    }
}

/// One-shot decode of a steady guidance tone.
pub fn decode_position(
    audio: &AudioBlock,
    mapping: &MappingConfig,
    synth: &SynthConfig,
) -> Result<DisplacementVector, ProbeError> {
    Decoder::new(*mapping, synth).decode(audio)
}
