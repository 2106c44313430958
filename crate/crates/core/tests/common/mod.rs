#![allow(dead_code)]

use sonic_guide::{
    render_stream, AudioBlock, DisplacementVector, MappingConfig, Mode, SonificationParams, Synth, SynthConfig,
};

/// Time allowed for the 30 ms parameter smoothers to settle.
pub const SETTLE: f64 = 0.25;

pub fn dv(x: f32, y: f32, z: f32) -> DisplacementVector {
    DisplacementVector::new(x, y, z).unwrap()
}

/// Steady-state rendering of a fixed position, smoothing transient removed.
pub fn render_at(d: DisplacementVector, seconds: f64) -> AudioBlock {
    let r = render_stream(
        &[(0.0, d)],
        Some(SETTLE + seconds),
        Mode::ThreeD,
        &SynthConfig::default(),
        &MappingConfig::default(),
    )
    .unwrap();
    r.audio.slice_seconds(SETTLE, SETTLE + seconds)
}

/// Steady-state rendering of a raw parameter frame.
pub fn render_params(p: &SonificationParams, seconds: f64) -> AudioBlock {
    let cfg = SynthConfig::default();
    let mut s = Synth::new(cfg, &MappingConfig::default()).unwrap();
    let fs = cfg.sample_rate as f64;
    let mut pre = vec![0.0; (SETTLE * fs) as usize];
    s.render_into(p, &mut pre);
    let mut out = vec![0.0; (seconds * fs).round() as usize];
    s.render_into(p, &mut out);
    AudioBlock::new(cfg.sample_rate, out)
}
