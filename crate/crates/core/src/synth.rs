//! Block-based synthesis of the monophonic guidance tone.
//!
//! The tone is a bank of octave-spaced sine partials whose frequencies glide
//! together in chroma. A raised-cosine envelope over log-frequency sets each
//! partial's amplitude, so the bank keeps its register while the pitch class
//! cycles. On top of that sit the beat and roughness amplitude modulators,
//! the pink-noise bed of the target zone and any earcons that are playing.
//!
//! All buffers are allocated in [`Synth::new`]; [`Synth::render_into`] does
//! no allocation and cannot fail.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::audio::AudioBlock;
use crate::earcons::{render_earcon, EarconKind};
use crate::mapping::{MappingConfig, SonificationParams};
use crate::noise::PinkNoise;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

/// Level above which the output guard starts to bend the waveform.
pub const SOFT_CLIP_KNEE: f64 = 0.95;

const MAX_EARCON_VOICES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub sample_rate: u32,
    pub block_size: usize,
    /// Number of octave-spaced partials in the chroma bank.
    pub partial_count: usize,
    /// Frequency of the lowest partial at chroma phase 0, Hz.
    pub base_frequency: f64,
    /// Centre of the spectral envelope at neutral brightness, Hz.
    pub envelope_center: f64,
    /// Half-width of the spectral envelope at neutral fullness, octaves.
    pub envelope_width: f64,
    /// Time constant of the parameter smoothers, seconds.
    pub smoothing_time: f64,
    pub master_gain: f64,
    pub noise_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sample_rate: 48_000,
            block_size: 256,
            partial_count: 10,
            // C0, exactly five octaves below the envelope centre.
            base_frequency: 523.25 / 32.0,
            envelope_center: 523.25,
            envelope_width: 2.5,
            smoothing_time: 0.030,
            master_gain: 0.5,
            noise_seed: 0x5EED_0001,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |m: String| Err(SynthError::InvalidConfig(m));
        if self.sample_rate < 8000 {
            return err(format!("sample_rate must be at least 8000, got {}", self.sample_rate));
        }
        if !self.block_size.is_power_of_two() || !(32..=4096).contains(&self.block_size) {
            return err(format!("block_size must be a power of two in [32, 4096], got {}", self.block_size));
        }
        if self.partial_count < 3 {
            return err(format!("partial_count must be at least 3, got {}", self.partial_count));
        }
        for (name, v) in [
            ("base_frequency", self.base_frequency),
            ("envelope_center", self.envelope_center),
            ("envelope_width", self.envelope_width),
            ("smoothing_time", self.smoothing_time),
            ("master_gain", self.master_gain),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn block_duration(&self) -> f64 {
        self.block_size as f64 / self.sample_rate as f64
    }
}

/// Mutable state of the render path.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthState {
    /// Position within the octave, `[0, 1)`.
    pub chroma_phase: f64,
    /// Oscillator phase per partial, `[0, 1)`.
    pub partial_phases: Vec<f64>,
    pub beat_phase: f64,
    pub roughness_phase: f64,
    /// One-pole smoothed copy of the commanded parameter frame.
    pub smoothed: SonificationParams,
    noise: PinkNoise,
}

impl SynthState {
    pub fn new(cfg: &SynthConfig) -> Result<Self, SynthError> {
        cfg.validate()?;
        Ok(SynthState {
            chroma_phase: 0.0,
            partial_phases: vec![0.0; cfg.partial_count],
            beat_phase: 0.0,
            roughness_phase: 0.0,
            smoothed: SonificationParams::NEUTRAL,
            noise: PinkNoise::new(cfg.noise_seed),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Voice {
    kind: Option<EarconKind>,
    pos: usize,
}

/// The guidance-tone generator.
#[derive(Debug, Clone)]
pub struct Synth {
    cfg: SynthConfig,
    roughness_rate: f64,
    brightness_shift: f64,
    fullness_widening: f64,
    /// Envelope centre in octaves above `base_frequency`.
    center_octave: f64,
    smoothing_coeff: f64,
    state: SynthState,
    click: Vec<f32>,
    triad: Vec<f32>,
    voices: [Voice; MAX_EARCON_VOICES],
    amps: Vec<f64>,
}

impl Synth {
    pub fn new(cfg: SynthConfig, mapping: &MappingConfig) -> Result<Self, SynthError> {
        let state = SynthState::new(&cfg)?;
        mapping.validate().map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        let fs = cfg.sample_rate as f64;
        Ok(Synth {
            roughness_rate: mapping.roughness_rate,
            brightness_shift: mapping.brightness_octave_shift_max,
            fullness_widening: mapping.fullness_bandwidth_max,
            center_octave: (cfg.envelope_center / cfg.base_frequency).log2(),
            smoothing_coeff: 1.0 - (-1.0 / (cfg.smoothing_time * fs)).exp(),
            click: render_earcon(EarconKind::Click, &cfg).frames,
            triad: render_earcon(EarconKind::Triad, &cfg).frames,
            voices: [Voice::default(); MAX_EARCON_VOICES],
            amps: vec![0.0; cfg.partial_count],
            state,
            cfg,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.cfg
    }

    pub fn state(&self) -> &SynthState {
        &self.state
    }

    /// Starts an earcon on a free voice; the oldest voice is stolen when all
    /// are busy. Zone events have no waveform and are ignored.
    pub fn trigger(&mut self, kind: EarconKind) {
        if !matches!(kind, EarconKind::Click | EarconKind::Triad) {
            return;
        }
        let slot = match self.voices.iter().position(|v| v.kind.is_none()) {
            Some(i) => i,
            None => {
                let mut oldest = 0;
                for (i, v) in self.voices.iter().enumerate() {
                    if v.pos > self.voices[oldest].pos {
                        oldest = i;
                    }
                }
                oldest
            }
        };
        self.voices[slot] = Voice { kind: Some(kind), pos: 0 };
    }

    /// Renders one block of `cfg.block_size` frames into a fresh buffer.
    pub fn render_block(&mut self, target: &SonificationParams) -> AudioBlock {
        let mut frames = vec![0.0; self.cfg.block_size];
        self.render_into(target, &mut frames);
        AudioBlock::new(self.cfg.sample_rate, frames)
    }

    /// Renders `out.len()` frames toward `target`. Allocation-free.
    pub fn render_into(&mut self, target: &SonificationParams, out: &mut [f32]) {
        let fs = self.cfg.sample_rate as f64;
        let inv_fs = 1.0 / fs;
        let alpha = self.smoothing_coeff;
        let n_partials = self.cfg.partial_count;
        let base = self.cfg.base_frequency;
        let taper_lo = 0.40 * fs;
        let taper_hi = 0.45 * fs;
        let master = self.cfg.master_gain;

        for sample in out.iter_mut() {
            let st = &mut self.state;
            smooth(&mut st.smoothed, target, alpha);
            let p = st.smoothed;

            st.chroma_phase += p.chroma_velocity * inv_fs;
            if st.chroma_phase >= 1.0 {
                st.chroma_phase -= 1.0;
                st.partial_phases.rotate_right(1);
            } else if st.chroma_phase < 0.0 {
                st.chroma_phase += 1.0;
                st.partial_phases.rotate_left(1);
            }
            // Guards the rounding case where `x + 1.0 == 1.0` for tiny negative x.
            if st.chroma_phase >= 1.0 {
                st.chroma_phase = 0.0;
            }

            let center = self.center_octave + p.brightness * self.brightness_shift;
            let half_width = self.cfg.envelope_width + p.fullness * self.fullness_widening;
            let mut amp_sum = 0.0;
            for (k, amp) in self.amps.iter_mut().enumerate().take(n_partials) {
                let octave = k as f64 + st.chroma_phase;
                let u = (octave - center) / half_width;
                let mut a = if u.abs() < 1.0 { 0.5 * (1.0 + (std::f64::consts::PI * u).cos()) } else { 0.0 };
                let freq = base * octave.exp2();
                if freq >= taper_lo {
                    a *= ((taper_hi - freq) / (taper_hi - taper_lo)).clamp(0.0, 1.0);
                }
                *amp = a;
                amp_sum += a;
            }

            let mut tone = 0.0;
            for k in 0..n_partials {
                let octave = k as f64 + st.chroma_phase;
                let freq = base * octave.exp2();
                let ph = &mut st.partial_phases[k];
                tone += self.amps[k] * (TAU * *ph).sin();
                *ph += freq * inv_fs;
                if *ph >= 1.0 {
                    *ph -= ph.floor();
                }
            }
            if amp_sum > 1e-9 {
                tone /= amp_sum;
            } else {
                tone = 0.0;
            }

            let beat = 1.0 - p.beat_depth * 0.5 * (1.0 - (TAU * st.beat_phase).cos());
            let rough = 1.0 - p.roughness_depth * 0.5 * (1.0 - (TAU * st.roughness_phase).cos());
            st.beat_phase = wrap_unit(st.beat_phase + p.beat_rate * inv_fs);
            st.roughness_phase = wrap_unit(st.roughness_phase + self.roughness_rate * inv_fs);

            let noise = st.noise.next_sample() * p.noise_gain;
            let mut mix = master * (tone * beat * rough + noise);

            for v in self.voices.iter_mut() {
                if let Some(kind) = v.kind {
                    let buf = match kind {
                        EarconKind::Click => &self.click,
                        _ => &self.triad,
                    };
                    if v.pos < buf.len() {
                        mix += buf[v.pos] as f64;
                        v.pos += 1;
                    }
                    if v.pos >= buf.len() {
                        *v = Voice::default();
                    }
                }
            }

            *sample = soft_clip(mix) as f32;
        }
    }
}

#[inline]
fn smooth(reg: &mut SonificationParams, target: &SonificationParams, alpha: f64) {
    reg.chroma_velocity += alpha * (target.chroma_velocity - reg.chroma_velocity);
    reg.beat_rate += alpha * (target.beat_rate - reg.beat_rate);
    reg.beat_depth += alpha * (target.beat_depth - reg.beat_depth);
    reg.roughness_depth += alpha * (target.roughness_depth - reg.roughness_depth);
    reg.brightness += alpha * (target.brightness - reg.brightness);
    reg.fullness += alpha * (target.fullness - reg.fullness);
    reg.noise_gain += alpha * (target.noise_gain - reg.noise_gain);
}

#[inline]
fn wrap_unit(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Identity below the knee, then a tanh shoulder that never reaches 1.
#[inline]
pub fn soft_clip(s: f64) -> f64 {
    let a = s.abs();
    if a <= SOFT_CLIP_KNEE {
        s
    } else {
        let room = 1.0 - SOFT_CLIP_KNEE;
        s.signum() * (SOFT_CLIP_KNEE + room * ((a - SOFT_CLIP_KNEE) / room).tanh())
    }
}
