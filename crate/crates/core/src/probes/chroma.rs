//! Chroma drift: how fast pitch class moves, in octaves per second.
//!
//! Each STFT frame is reduced to a circular chroma profile (spectral peaks
//! folded onto one octave, each drawn as a narrow bump weighted by its
//! magnitude). Consecutive profiles are circularly cross-correlated; the
//! lag of the best match is that hop's log-frequency shift. Because the
//! profile is circular, the octave wrap of a Shepard glide costs nothing.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::dsp::{spectral_peaks, stft_magnitudes};
use super::{prepare, ProbeError};
use crate::audio::AudioBlock;

const WINDOW: usize = 4096;
const HOP: usize = 1024;
/// Profile resolution: one bin per cent.
const BINS: usize = 1200;
const BUMP_SIGMA: f64 = 20.0;
/// Largest plausible shift between consecutive frames, octaves. Shifts
/// near half an octave are ambiguous on a circle.
const MAX_SHIFT: f64 = 0.25;
const MIN_FREQ: f64 = 150.0;
const MAX_FREQ: f64 = 16_000.0;
const PEAK_FLOOR_DB: f64 = 50.0;

/// Estimated chroma drift in octaves per second (positive = rising).
pub fn estimate_chroma_rate(audio: &AudioBlock) -> Result<f64, ProbeError> {
    let x = prepare(audio)?;
    let fs = audio.sample_rate as f64;
    let bin_hz = fs / WINDOW as f64;
    let f_hi = MAX_FREQ.min(0.45 * fs);

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(BINS);
    let inv = planner.plan_fft_inverse(BINS);

    let profiles: Vec<Option<Vec<Complex<f64>>>> = stft_magnitudes(&x, WINDOW, HOP)
        .iter()
        .map(|mag| {
            let peaks = spectral_peaks(mag, bin_hz, MIN_FREQ, f_hi, PEAK_FLOOR_DB);
            if peaks.is_empty() {
                return None;
            }
            let mut prof = vec![Complex::new(0.0, 0.0); BINS];
            let reach = (4.0 * BUMP_SIGMA).ceil() as i64;
            for p in peaks {
                let c = p.freq.log2().rem_euclid(1.0) * BINS as f64;
                let centre = c.floor() as i64;
                for off in -reach..=reach {
                    let i = centre + off;
                    let d = i as f64 - c;
                    let w = p.magnitude * (-0.5 * (d / BUMP_SIGMA).powi(2)).exp();
                    prof[i.rem_euclid(BINS as i64) as usize].re += w;
                }
            }
            fwd.process(&mut prof);
            Some(prof)
        })
        .collect();

    let max_lag = (MAX_SHIFT * BINS as f64) as i64;
    let mut shifts = Vec::new();
    let mut xc = vec![Complex::new(0.0, 0.0); BINS];
    for pair in profiles.windows(2) {
        let (Some(a), Some(b)) = (&pair[0], &pair[1]) else { continue };
        for (o, (u, v)) in xc.iter_mut().zip(a.iter().zip(b)) {
            *o = u.conj() * v;
        }
        inv.process(&mut xc);
        // xc[s] = sum_i a[i] * b[i + s]: peaks at the upward shift from a to b.
        let at = |s: i64| xc[s.rem_euclid(BINS as i64) as usize].re;
        let best = (-max_lag..=max_lag).max_by(|&p, &q| at(p).total_cmp(&at(q))).unwrap_or(0);
        let (l, c, r) = (at(best - 1), at(best), at(best + 1));
        let delta = if l > 0.0 && c > 0.0 && r > 0.0 {
            let (l, c, r) = (l.ln(), c.ln(), r.ln());
            parabolic(l, c, r)
        } else {
            parabolic(l, c, r)
        };
        shifts.push((best as f64 + delta) / BINS as f64);
    }
    if shifts.is_empty() {
        return Err(ProbeError::NoSignal { rms_dbfs: 20.0 * audio.rms().max(1e-12).log10() });
    }
    let hop_seconds = HOP as f64 / fs;
    Ok(shifts.iter().sum::<f64>() / shifts.len() as f64 / hop_seconds)
}

fn parabolic(l: f64, c: f64, r: f64) -> f64 {
    let denom = l - 2.0 * c + r;
    if denom.abs() < 1e-15 {
        0.0
    } else {
        (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// A Shepard-like glide built directly, independent of the synth.
    fn glide(rate: f64, seconds: f64) -> AudioBlock {
        let fs = 48_000.0;
        let n = (seconds * fs) as usize;
        let mut phases = [0.0f64; 6];
        let frames = (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                let chroma = (rate * t).rem_euclid(1.0);
                let mut s = 0.0;
                for (k, ph) in phases.iter_mut().enumerate() {
                    let oct = k as f64 + chroma;
                    let f = 110.0 * oct.exp2();
                    let a = (0.5 - 0.5 * (TAU * oct / 6.0).cos()).max(0.0);
                    s += a * (TAU * *ph).sin();
                    *ph += f / fs;
                }
                (0.2 * s) as f32
            })
            .collect();
        AudioBlock::new(48_000, frames)
    }

    #[test]
    fn signed_rates_of_a_reference_glide() {
        for rate in [-1.2, -0.3, 0.0, 0.5, 1.0] {
            let est = estimate_chroma_rate(&glide(rate, 2.0)).unwrap();
            assert!((est - rate).abs() <= 0.05 * rate.abs() + 0.01, "{rate} -> {est}");
        }
    }
}
