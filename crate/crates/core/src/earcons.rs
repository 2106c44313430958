//! Discrete cues layered over the guidance tone: a click when the operator
//! passes the target height, a short major triad when passing the target
//! depth, and zone transitions that gate the pink-noise bed.
//!
//! Crossings are debounced with a hysteresis: after a cue fires, its axis is
//! disarmed until the coordinate moves further than `hysteresis` from zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBlock;
use crate::mapping::{in_target_zone, DisplacementVector, MappingConfig, Mode};
use crate::synth::SynthConfig;

pub const CLICK_SECONDS: f64 = 0.003;
pub const CLICK_PEAK_DBFS: f64 = -6.0;
pub const TRIAD_SECONDS: f64 = 0.180;
pub const TRIAD_PEAK_DBFS: f64 = -9.0;
/// C5, E5, G5.
pub const TRIAD_FREQUENCIES: [f64; 3] = [523.25, 659.26, 783.99];
const TRIAD_DECAY_SECONDS: f64 = 0.040;
const TRIAD_FADE_SECONDS: f64 = 0.002;
const CLICK_SEED: u64 = 0xC11C;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EarconKind {
    Click,
    Triad,
    ZoneEnter,
    ZoneExit,
}

impl EarconKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EarconKind::Click => "click",
            EarconKind::Triad => "triad",
            EarconKind::ZoneEnter => "zone_enter",
            EarconKind::ZoneExit => "zone_exit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarconEvent {
    pub kind: EarconKind,
    /// Seconds from stream start.
    pub time: f64,
}

/// Debounce state of the plane-crossing detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingState {
    pub armed_y: bool,
    pub armed_z: bool,
    pub last_sign_y: i8,
    pub last_sign_z: i8,
    pub in_zone: bool,
}

impl CrossingState {
    /// Initial state taken from the first position of a stream.
    pub fn new(first: &DisplacementVector, cfg: &MappingConfig) -> Self {
        let h = cfg.hysteresis;
        CrossingState {
            armed_y: (first.y.abs() as f64) > h,
            armed_z: (first.z.abs() as f64) > h,
            last_sign_y: side(first.y),
            last_sign_z: side(first.z),
            in_zone: in_target_zone(first, cfg),
        }
    }
}

fn side(v: f32) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

/// One axis of the Schmitt-style crossing detector. Returns whether a
/// crossing fires for `value`.
fn step_axis(value: f32, armed: &mut bool, last_sign: &mut i8, hysteresis: f64) -> bool {
    let mut fired = false;
    if value != 0.0 {
        let s = side(value);
        if s != *last_sign {
            if *armed {
                fired = true;
                *armed = false;
            }
            *last_sign = s;
        }
    }
    if value.abs() as f64 > hysteresis {
        *armed = true;
    }
    fired
}

/// Feeds the next position of a stream to the detector and appends any cues
/// to `out`, stamped with `time`.
///
/// In 3D the click belongs to the `z = 0` plane and the triad to `y = 0`.
/// In 2D `z` is locked at zero and the click moves to the `y = 0` crossing.
pub fn detect_events(
    next: &DisplacementVector,
    state: &mut CrossingState,
    cfg: &MappingConfig,
    mode: Mode,
    time: f64,
    out: &mut Vec<EarconEvent>,
) {
    let h = cfg.hysteresis;
    match mode {
        Mode::ThreeD => {
            if step_axis(next.z, &mut state.armed_z, &mut state.last_sign_z, h) {
                out.push(EarconEvent { kind: EarconKind::Click, time });
            }
            if step_axis(next.y, &mut state.armed_y, &mut state.last_sign_y, h) {
                out.push(EarconEvent { kind: EarconKind::Triad, time });
            }
        }
        Mode::TwoD => {
            if step_axis(next.y, &mut state.armed_y, &mut state.last_sign_y, h) {
                out.push(EarconEvent { kind: EarconKind::Click, time });
            }
        }
    }
    let inside = in_target_zone(next, cfg);
    if inside != state.in_zone {
        state.in_zone = inside;
        let kind = if inside { EarconKind::ZoneEnter } else { EarconKind::ZoneExit };
        out.push(EarconEvent { kind, time });
    }
}

fn dbfs_to_linear(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

fn normalize_peak(frames: &mut [f64], peak: f64) {
    let m = frames.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        let g = peak / m;
        frames.iter_mut().for_each(|v| *v *= g);
    }
}

/// Waveform of a cue at the configured sample rate. Zone events are silent
/// (empty): they act through the noise bed instead.
pub fn render_earcon(kind: EarconKind, cfg: &SynthConfig) -> AudioBlock {
    let fs = cfg.sample_rate as f64;
    let frames: Vec<f64> = match kind {
        EarconKind::Click => {
            let n = (CLICK_SECONDS * fs).round() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(CLICK_SEED);
            let mut v: Vec<f64> = (0..n)
                .map(|i| {
                    let w = 0.5 - 0.5 * (std::f64::consts::TAU * (i as f64 + 0.5) / n as f64).cos();
                    w * rng.gen_range(-1.0..1.0)
                })
                .collect();
            normalize_peak(&mut v, dbfs_to_linear(CLICK_PEAK_DBFS));
            v
        }
        EarconKind::Triad => {
            let n = (TRIAD_SECONDS * fs).round() as usize;
            let fade = (TRIAD_FADE_SECONDS * fs).round().max(1.0) as usize;
            let mut v: Vec<f64> = (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    let tone: f64 = TRIAD_FREQUENCIES.iter().map(|f| (std::f64::consts::TAU * f * t).sin()).sum();
                    let mut env = (-t / TRIAD_DECAY_SECONDS).exp();
                    let from_end = n - 1 - i;
                    if from_end < fade {
                        env *= 0.5 - 0.5 * (std::f64::consts::PI * from_end as f64 / fade as f64).cos();
                    }
                    tone * env
                })
                .collect();
            normalize_peak(&mut v, dbfs_to_linear(TRIAD_PEAK_DBFS));
            v
        }
        EarconKind::ZoneEnter | EarconKind::ZoneExit => Vec::new(),
    };
    AudioBlock::new(cfg.sample_rate, frames.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn dv(x: f32, y: f32, z: f32) -> DisplacementVector {
        DisplacementVector { x, y, z }
    }

    fn run(path: &[DisplacementVector], mode: Mode) -> Vec<EarconEvent> {
        let cfg = MappingConfig::default();
        let mut st = CrossingState::new(&path[0], &cfg);
        let mut out = Vec::new();
        for (i, p) in path.iter().enumerate().skip(1) {
            detect_events(p, &mut st, &cfg, mode, i as f64, &mut out);
        }
        out
    }

    #[test]
    fn armed_z_flip_clicks() {
        let ev = run(&[dv(0.5, 0.5, 0.1), dv(0.5, 0.5, -0.1)], Mode::ThreeD);
        assert_eq!(ev, vec![EarconEvent { kind: EarconKind::Click, time: 1.0 }]);
    }

    #[test]
    fn jitter_below_hysteresis_is_silent() {
        let path: Vec<_> = (0..200).map(|i| dv(0.5, 0.5, if i % 2 == 0 { 0.005 } else { -0.005 })).collect();
        assert!(run(&path, Mode::ThreeD).is_empty());
    }

    #[test]
    fn three_qualified_crossings_three_clicks() {
        let zs = [0.1, 0.05, -0.01, -0.05, 0.01, 0.03, 0.001, -0.03, -0.1];
        let path: Vec<_> = zs.iter().map(|&z| dv(0.5, 0.5, z)).collect();
        let clicks = run(&path, Mode::ThreeD).iter().filter(|e| e.kind == EarconKind::Click).count();
        assert_eq!(clicks, 3);
    }

    #[test]
    fn retrigger_after_rearm() {
        // Cross, jitter back without re-arming, then a full excursion.
        let zs = [0.1, -0.01, 0.01, -0.01, -0.05, 0.05];
        let path: Vec<_> = zs.iter().map(|&z| dv(0.5, 0.5, z)).collect();
        let ev = run(&path, Mode::ThreeD);
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].time, 1.0);
        assert_eq!(ev[1].time, 5.0);
    }

    #[test]
    fn y_crossing_is_triad_in_3d_and_click_in_2d() {
        let path = [dv(0.5, 0.2, 0.0), dv(0.5, -0.2, 0.0)];
        assert_eq!(run(&path, Mode::ThreeD)[0].kind, EarconKind::Triad);
        let ev = run(&path, Mode::TwoD);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EarconKind::Click);
    }

    #[test]
    fn zone_transitions() {
        let path = [dv(0.5, 0.0, 0.0), dv(0.01, 0.0, 0.0), dv(0.0, 0.0, 0.0), dv(0.2, 0.0, 0.0)];
        let kinds: Vec<_> = run(&path, Mode::ThreeD).iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EarconKind::ZoneEnter, EarconKind::ZoneExit]);
    }

    #[test]
    fn click_shape() {
        let b = render_earcon(EarconKind::Click, &SynthConfig::default());
        assert_eq!(b.len(), 144);
        let peak = b.peak() as f64;
        assert!((peak - dbfs_to_linear(-6.0)).abs() < 1e-6);
        // All energy sits inside the first 4 ms.
        assert!(b.duration() < 0.004);
    }

    #[test]
    fn triad_lengths() {
        let b = render_earcon(EarconKind::Triad, &SynthConfig::default());
        assert_eq!(b.len(), 8640);
        assert!((b.peak() as f64 - dbfs_to_linear(-9.0)).abs() < 1e-6);
        let cfg = SynthConfig { sample_rate: 44_100, ..SynthConfig::default() };
        let b = render_earcon(EarconKind::Triad, &cfg);
        assert_eq!(b.len(), 7938);
        assert!(render_earcon(EarconKind::ZoneEnter, &cfg).is_empty());
    }

    /// Zero-padded FFT; the three largest local maxima must sit on the
    /// chord tones within 1 Hz.
    #[test]
    fn triad_spectral_peaks() {
        let cfg = SynthConfig::default();
        let b = render_earcon(EarconKind::Triad, &cfg);
        let n = 1 << 20;
        let mut buf: Vec<Complex<f64>> = b.frames.iter().map(|&s| Complex::new(s as f64, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
        let df = cfg.sample_rate as f64 / n as f64;
        let mut peaks: Vec<(f64, f64)> = (1..mag.len() - 1)
            .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
            .map(|k| (mag[k], k as f64 * df))
            .collect();
        peaks.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut top: Vec<f64> = peaks[..3].iter().map(|p| p.1).collect();
        top.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in top.iter().zip(TRIAD_FREQUENCIES) {
            assert!((got - want).abs() <= 1.0, "peak {got} vs {want}");
        }
    }
}
