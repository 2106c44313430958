//! Shared DSP helpers for the probes: STFT, FFT-domain filtering, spectral
//! peak picking and sinusoid fitting.

use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Analysis window length. At 48 kHz this resolves ~12 Hz per bin, enough to
/// separate octave-spaced partials from about 50 Hz up, while staying short
/// (85 ms) relative to a one-second analysis span.
pub const STFT_WINDOW: usize = 4096;
/// 75% overlap.
pub const STFT_HOP: usize = STFT_WINDOW / 4;

pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect()
}

/// Magnitude spectra (bins `0..=N/2`) of Hann-windowed frames.
pub fn stft_magnitudes(samples: &[f64], window: usize, hop: usize) -> Vec<Vec<f64>> {
    if samples.len() < window {
        return Vec::new();
    }
    let win = hann(window);
    let fft = FftPlanner::new().plan_fft_forward(window);
    let mut buf = vec![Complex::new(0.0, 0.0); window];
    let mut frames = Vec::new();
    let mut start = 0;
    while start + window <= samples.len() {
        for (b, (s, w)) in buf.iter_mut().zip(samples[start..start + window].iter().zip(&win)) {
            *b = Complex::new(s * w, 0.0);
        }
        fft.process(&mut buf);
        frames.push(buf[..=window / 2].iter().map(|c| c.norm()).collect());
        start += hop;
    }
    frames
}

/// Applies a real, zero-phase frequency response `gain(f_hz)` to `x` by
/// whole-signal FFT. When `analytic` is set, negative frequencies are
/// removed and positive ones doubled so the result is the analytic signal
/// of the filtered input.
pub fn fft_filter(x: &[f64], fs: f64, analytic: bool, gain: impl Fn(f64) -> f64) -> Vec<Complex<f64>> {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let (f, negative) =
            if k <= n / 2 { (k as f64 * fs / n as f64, false) } else { ((n - k) as f64 * fs / n as f64, true) };
        let mut g = gain(f);
        if analytic {
            if negative {
                g = 0.0;
            } else if k != 0 && !(n.is_multiple_of(2) && k == n / 2) {
                g *= 2.0;
            }
        }
        *c *= g;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Raised-cosine transition: 0 below `lo`, 1 above `hi`.
pub fn smoothstep(f: f64, lo: f64, hi: f64) -> f64 {
    if f <= lo {
        0.0
    } else if f >= hi {
        1.0
    } else {
        0.5 - 0.5 * (PI * (f - lo) / (hi - lo)).cos()
    }
}

/// Low-pass with a raised-cosine roll-off from `pass` to `stop`.
pub fn lowpass(x: &[f64], fs: f64, pass: f64, stop: f64) -> Vec<f64> {
    fft_filter(x, fs, false, |f| 1.0 - smoothstep(f, pass, stop)).into_iter().map(|c| c.re).collect()
}

/// Interpolated spectral peak: frequency in Hz and linear magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq: f64,
    pub magnitude: f64,
}

/// Local maxima of a magnitude spectrum within `[f_lo, f_hi]` and no more
/// than `floor_db` below the strongest bin, refined by quadratic
/// interpolation of the log magnitude.
pub fn spectral_peaks(mag: &[f64], bin_hz: f64, f_lo: f64, f_hi: f64, floor_db: f64) -> Vec<Peak> {
    let k_lo = ((f_lo / bin_hz).ceil() as usize).max(1);
    let k_hi = ((f_hi / bin_hz).floor() as usize).min(mag.len().saturating_sub(2));
    if k_lo >= k_hi {
        return Vec::new();
    }
    let max = mag[k_lo..=k_hi].iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let floor = max * 10f64.powf(-floor_db / 20.0);
    let mut peaks = Vec::new();
    for k in k_lo..=k_hi {
        let m = mag[k];
        if m < floor || m <= mag[k - 1] || m < mag[k + 1] {
            continue;
        }
        let a = mag[k - 1].max(1e-300).ln();
        let b = m.ln();
        let c = mag[k + 1].max(1e-300).ln();
        let denom = a - 2.0 * b + c;
        let delta = if denom.abs() > 1e-12 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
        let log_peak = b - 0.25 * (a - c) * delta;
        peaks.push(Peak { freq: (k as f64 + delta) * bin_hz, magnitude: log_peak.exp() });
    }
    peaks
}

/// Least-squares fit of `a + b cos(2πft) + c sin(2πft)` to uniformly
/// sampled `x`. Returns `(offset, amplitude, residual_energy)`.
pub fn fit_sinusoid(x: &[f64], rate: f64, freq: f64) -> (f64, f64, f64) {
    let w = TAU * freq / rate;
    // Normal equations of the 3-column design matrix.
    let (mut s11, mut s1c, mut s1s, mut scc, mut scs, mut sss) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut y1, mut yc, mut ys) = (0.0, 0.0, 0.0);
    for (i, &v) in x.iter().enumerate() {
        let (s, c) = (w * i as f64).sin_cos();
        s11 += 1.0;
        s1c += c;
        s1s += s;
        scc += c * c;
        scs += c * s;
        sss += s * s;
        y1 += v;
        yc += v * c;
        ys += v * s;
    }
    let m = [[s11, s1c, s1s], [s1c, scc, scs], [s1s, scs, sss]];
    let Some(coef) = solve3(m, [y1, yc, ys]) else {
        let mean = y1 / s11.max(1.0);
        let res = x.iter().map(|v| (v - mean).powi(2)).sum();
        return (mean, 0.0, res);
    };
    let mut res = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let (s, c) = (w * i as f64).sin_cos();
        let e = v - (coef[0] + coef[1] * c + coef[2] * s);
        res += e * e;
    }
    (coef[0], coef[1].hypot(coef[2]), res)
}

fn solve3(m: [[f64; 3]; 3], y: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max).powi(3);
    if d.abs() <= 1e-13 * scale {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = y[row];
        }
        *o = det(&mc) / d;
    }
    Some(out)
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden_min(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Normalised autocorrelation of a mean-removed sequence for lags `0..max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n.max(1) as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let e0: f64 = d.iter().map(|v| v * v).sum();
    if e0 <= 0.0 {
        return vec![0.0; max_lag.min(n)];
    }
    (0..max_lag.min(n)).map(|lag| d[..n - lag].iter().zip(&d[lag..]).map(|(a, b)| a * b).sum::<f64>() / e0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_sinusoid() {
        let rate = 1000.0;
        let x: Vec<f64> = (0..900).map(|i| 2.0 + 0.7 * (TAU * 3.3 * i as f64 / rate + 0.4).cos()).collect();
        let (a, amp, res) = fit_sinusoid(&x, rate, 3.3);
        assert!((a - 2.0).abs() < 1e-9 && (amp - 0.7).abs() < 1e-9 && res < 1e-12);
    }

    #[test]
    fn golden_finds_minimum() {
        let m = golden_min(0.0, 10.0, 1e-9, |v| (v - 3.7).powi(2));
        assert!((m - 3.7).abs() < 1e-6);
    }

    #[test]
    fn peak_interpolation_is_close() {
        let fs = 48_000.0;
        let f0 = 1234.5;
        let x: Vec<f64> = (0..STFT_WINDOW).map(|i| (TAU * f0 * i as f64 / fs).sin()).collect();
        let mag = &stft_magnitudes(&x, STFT_WINDOW, STFT_HOP)[0];
        let p = spectral_peaks(mag, fs / STFT_WINDOW as f64, 100.0, 20_000.0, 40.0);
        assert_eq!(p.len(), 1);
        assert!((p[0].freq - f0).abs() < 0.5, "{}", p[0].freq);
    }

    #[test]
    fn lowpass_removes_high_tone() {
        let fs = 1000.0;
        let x: Vec<f64> =
            (0..2000).map(|i| (TAU * 5.0 * i as f64 / fs).sin() + (TAU * 200.0 * i as f64 / fs).sin()).collect();
        let y = lowpass(&x, fs, 20.0, 30.0);
        let err = (0..2000).map(|i| (y[i] - (TAU * 5.0 * i as f64 / fs).sin()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn autocorrelation_of_periodic_signal() {
        let x: Vec<f64> = (0..1000).map(|i| (TAU * i as f64 / 50.0).cos()).collect();
        let ac = autocorrelation(&x, 200);
        assert!((ac[0] - 1.0).abs() < 1e-12);
        let peak = (30..80).max_by(|&a, &b| ac[a].partial_cmp(&ac[b]).unwrap()).unwrap();
        assert_eq!(peak, 50);
    }
}
