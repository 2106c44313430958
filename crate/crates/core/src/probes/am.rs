//! Amplitude modulation: slow beats and fast roughness.
//!
//! Two envelopes are extracted. The slow one is the square root of the
//! low-passed signal power; it follows beats but not roughness. The fast
//! one is the magnitude of the analytic high band (above ~700 Hz, where
//! partial-difference tones cannot reach the roughness band), low-passed at
//! 150 Hz. A sinusoid is fitted to each, and each fit's depth is reported as
//! `(max - min) / max` of the fitted modulator, the quantity the synth sets.
//!
//! All filtering is done on a mirror-extended copy so the analysis edges
//! carry no wrap-around transients.

use serde::{Deserialize, Serialize};

use super::dsp::{autocorrelation, fft_filter, fit_sinusoid, golden_min, smoothstep};
use super::{prepare, ProbeError};
use crate::audio::AudioBlock;

/// Beats live below this rate, Hz.
pub const BEAT_BAND_MAX: f64 = 12.0;
/// Roughness search band, Hz.
pub const ROUGHNESS_BAND: (f64, f64) = (40.0, 100.0);
/// Depth below which a band is considered unmodulated.
pub const MIN_DEPTH: f64 = 0.01;

/// A fit explaining at least this much of the envelope variance is treated
/// as a genuine periodic modulation rather than an incidental fluctuation.
pub const COHERENT_FIT: f64 = 0.95;
/// A fit must span at least this many modulation cycles to count as
/// periodic; anything slower is indistinguishable from level drift.
pub const MIN_CYCLES: f64 = 1.0;

const ENVELOPE_RATE: f64 = 1000.0;
const TRIM_SECONDS: f64 = 0.05;
const BEAT_GRID: (f64, f64, f64) = (0.1, 14.0, 0.05);
const ROUGH_GRID: (f64, f64, f64) = (30.0, 120.0, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationBand {
    None,
    Beats,
    Roughness,
}

impl ModulationBand {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModulationBand::None => "none",
            ModulationBand::Beats => "beats",
            ModulationBand::Roughness => "roughness",
        }
    }
}

/// Best sinusoidal fit within one modulation band.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BandFit {
    pub rate: f64,
    pub depth: f64,
    /// Fraction of the envelope's variance the sinusoid explains.
    pub r_squared: f64,
    /// Modulation cycles covered by the analysed span.
    pub cycles: f64,
}

impl BandFit {
    /// Whether the fit describes a genuine periodic modulation.
    pub fn coherent(&self) -> bool {
        self.r_squared >= COHERENT_FIT && self.cycles >= MIN_CYCLES
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmEstimate {
    pub band: ModulationBand,
    /// Rate of the dominant band, Hz (0 when `band` is none).
    pub rate: f64,
    /// Depth of the dominant band, in `[0, 1]`.
    pub depth: f64,
    pub beats: BandFit,
    pub roughness: BandFit,
}

struct Envelopes {
    rate: f64,
    slow: Vec<f64>,
    fast: Vec<f64>,
    fast_trend: Vec<f64>,
}

fn mirrored(x: &[f64]) -> Vec<f64> {
    x.iter().chain(x.iter().rev()).copied().collect()
}

fn envelopes(x: &[f64], fs: f64) -> Envelopes {
    let n = x.len();
    let step = (fs / ENVELOPE_RATE).round().max(1.0) as usize;
    let rate = fs / step as f64;
    let decimate = |v: Vec<f64>| -> Vec<f64> { v.into_iter().take(n).step_by(step).collect() };

    let power: Vec<f64> = x.iter().map(|v| v * v).collect();
    let slow_power = fft_filter(&mirrored(&power), fs, false, |f| 1.0 - smoothstep(f, 14.0, 30.0));
    let slow = decimate(slow_power.iter().map(|c| c.re.max(0.0).sqrt()).collect());

    let hi = fft_filter(&mirrored(x), fs, true, |f| {
        smoothstep(f, 600.0, 900.0) * (1.0 - smoothstep(f, 0.4 * fs, 0.45 * fs))
    });
    let mag: Vec<f64> = hi.iter().map(|c| c.norm()).collect();
    let fast_full = fft_filter(&mag, fs, false, |f| 1.0 - smoothstep(f, 130.0, 170.0));
    let fast = decimate(fast_full.iter().map(|c| c.re).collect());
    let trend = fft_filter(&mirrored(&fast), rate, false, |f| 1.0 - smoothstep(f, 14.0, 30.0));
    let fast_trend = trend.iter().take(fast.len()).map(|c| c.re).collect();

    let trim = ((TRIM_SECONDS * rate) as usize).min(slow.len() / 4);
    let cut = |v: Vec<f64>| v[trim..v.len() - trim].to_vec();
    Envelopes { rate, slow: cut(slow), fast: cut(fast), fast_trend: cut(fast_trend) }
}

fn depth_from_ratio(rho: f64) -> f64 {
    let rho = rho.max(0.0);
    (2.0 * rho / (1.0 + rho)).min(1.0)
}

/// Grid search then golden-section refinement of a residual over frequency.
fn best_frequency(grid: (f64, f64, f64), residual: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi, step) = grid;
    let count = ((hi - lo) / step).round() as usize;
    let mut best = (lo, f64::INFINITY);
    for i in 0..=count {
        let f = lo + i as f64 * step;
        let r = residual(f);
        if r < best.1 {
            best = (f, r);
        }
    }
    golden_min((best.0 - step).max(lo * 0.5), best.0 + step, 1e-6 * hi, residual)
}

fn fit_beats(env: &Envelopes) -> BandFit {
    let x = &env.slow;
    let f = best_frequency(BEAT_GRID, |f| fit_sinusoid(x, env.rate, f).2);
    let (offset, amp, residual) = fit_sinusoid(x, env.rate, f);
    if offset <= 0.0 {
        return BandFit::default();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    BandFit {
        rate: f,
        depth: depth_from_ratio(amp / offset),
        r_squared: explained(residual, var),
        cycles: f * x.len() as f64 / env.rate,
    }
}

fn explained(residual: f64, variance: f64) -> f64 {
    if variance <= 0.0 {
        0.0
    } else {
        (1.0 - residual / variance).clamp(0.0, 1.0)
    }
}

/// Fits `fast ≈ trend · (1 + ρ cos(2πft + φ))`, i.e. a modulation whose
/// amplitude follows the local level, so slow beats do not disturb it.
fn fit_relative(env: &Envelopes, f: f64) -> (f64, f64, f64) {
    let w = std::f64::consts::TAU * f / env.rate;
    let (mut scc, mut scs, mut sss, mut yc, mut ys, mut yy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (&e, &l)) in env.fast.iter().zip(&env.fast_trend).enumerate() {
        let (s, c) = (w * i as f64).sin_cos();
        let (lc, ls, y) = (l * c, l * s, e - l);
        scc += lc * lc;
        scs += lc * ls;
        sss += ls * ls;
        yc += y * lc;
        ys += y * ls;
        yy += y * y;
    }
    let det = scc * sss - scs * scs;
    if det.abs() < 1e-300 {
        return (0.0, yy, yy);
    }
    let a = (yc * sss - ys * scs) / det;
    let b = (ys * scc - yc * scs) / det;
    let residual = yy - (a * yc + b * ys);
    (a.hypot(b), residual, yy)
}

fn fit_roughness(env: &Envelopes) -> BandFit {
    if env.fast_trend.iter().all(|&l| l <= 0.0) {
        return BandFit::default();
    }
    let f = best_frequency(ROUGH_GRID, |f| fit_relative(env, f).1);
    let (rho, residual, total) = fit_relative(env, f);
    BandFit {
        rate: f,
        depth: depth_from_ratio(rho),
        r_squared: explained(residual, total),
        cycles: f * env.fast.len() as f64 / env.rate,
    }
}

/// Estimates the dominant amplitude modulation and classifies its band.
pub fn estimate_am(audio: &AudioBlock) -> Result<AmEstimate, ProbeError> {
    let x = prepare(audio)?;
    let env = envelopes(&x, audio.sample_rate as f64);
    let beats = fit_beats(&env);
    let roughness = fit_roughness(&env);

    let beat_ok = beats.depth >= MIN_DEPTH && beats.rate < BEAT_BAND_MAX;
    let rough_ok = roughness.depth >= MIN_DEPTH && (ROUGHNESS_BAND.0..=ROUGHNESS_BAND.1).contains(&roughness.rate);
    let band = match (beat_ok, rough_ok) {
        (true, true) => {
            // Prefer the coherent (well-fitted) modulation, then the deeper one.
            let (bc, rc) = (beats.coherent(), roughness.coherent());
            if rc && !bc || (rc == bc && roughness.depth > beats.depth) {
                ModulationBand::Roughness
            } else {
                ModulationBand::Beats
            }
        }
        (true, false) => ModulationBand::Beats,
        (false, true) => ModulationBand::Roughness,
        (false, false) => ModulationBand::None,
    };
    let (rate, depth) = match band {
        ModulationBand::Beats => (beats.rate, beats.depth),
        ModulationBand::Roughness => (roughness.rate, roughness.depth),
        ModulationBand::None => (0.0, beats.depth.max(roughness.depth)),
    };
    Ok(AmEstimate { band, rate, depth, beats, roughness })
}

/// Normalised autocorrelation of the slow amplitude envelope, sampled at
/// `1 / lag_step` Hz. Returns `(lag_step_seconds, values)`.
pub fn envelope_autocorrelation(audio: &AudioBlock, max_lag_seconds: f64) -> Result<(f64, Vec<f64>), ProbeError> {
    let x = prepare(audio)?;
    let env = envelopes(&x, audio.sample_rate as f64);
    let max_lag = (max_lag_seconds * env.rate).ceil() as usize + 1;
    Ok((1.0 / env.rate, autocorrelation(&env.slow, max_lag)))
}
