mod common;

use common::{dv, render_at, render_params};
use sonic_guide::probes::{
    analyze, decode_position, envelope_autocorrelation, estimate_am, estimate_chroma_rate, estimate_spectral_balance,
    ModulationBand, ProbeError, ENVELOPE_SPREAD,
};
use sonic_guide::{AudioBlock, DisplacementVector, MappingConfig, SonificationParams, SynthConfig};

fn chroma(d: DisplacementVector, secs: f64) -> f64 {
    estimate_chroma_rate(&render_at(d, secs)).unwrap()
}

#[test]
fn chroma_rate_at_half_x() {
    let v = chroma(dv(0.5, 0.0, 0.0), 4.0);
    assert!((v + 0.75).abs() <= 0.0375, "{v}");
}

#[test]
fn chroma_rate_at_origin() {
    let v = chroma(DisplacementVector::ORIGIN, 2.0);
    assert!(v.abs() < 0.02, "{v}");
}

#[test]
fn chroma_rate_at_negative_full_x() {
    let v = chroma(dv(-1.0, 0.0, 0.0), 2.0);
    assert!((v - 1.5).abs() <= 0.075, "{v}");
}

#[test]
fn chroma_rate_accuracy_across_range() {
    let cfg = MappingConfig::default();
    for x in [-1.0f32, -0.6, -0.2, -0.07, 0.07, 0.3, 0.8, 1.0] {
        let want = -cfg.v_max * x as f64;
        let got = chroma(dv(x, 0.0, 0.0), 1.0);
        assert!((got - want).abs() <= 0.05 * want.abs(), "x={x}: {got} vs {want}");
    }
}

#[test]
fn chroma_probe_rejects_silence() {
    let silent = AudioBlock::silent(48_000, 48_000);
    assert!(matches!(estimate_chroma_rate(&silent), Err(ProbeError::NoSignal { .. })));
}

#[test]
fn four_hertz_beats_autocorrelation_peak() {
    let p = SonificationParams { beat_rate: 4.0, beat_depth: 1.0, ..SonificationParams::NEUTRAL };
    let (step, ac) = envelope_autocorrelation(&render_params(&p, 2.0), 0.5).unwrap();
    let lo = (0.1 / step) as usize;
    let peak = (lo..ac.len()).max_by(|&a, &b| ac[a].total_cmp(&ac[b])).unwrap();
    let lag = peak as f64 * step;
    assert!((lag - 0.25).abs() <= 0.25 * 0.02, "{lag}");
}

#[test]
fn beats_at_half_negative_y() {
    let am = estimate_am(&render_at(dv(0.0, -0.5, 0.0), 1.0)).unwrap();
    assert_eq!(am.band, ModulationBand::Beats);
    assert!((am.rate - 4.0).abs() <= 0.08, "{am:?}");
    assert!(am.depth > 0.9, "{am:?}");
}

#[test]
fn roughness_at_full_positive_y() {
    let am = estimate_am(&render_at(dv(0.0, 1.0, 0.0), 1.0)).unwrap();
    assert_eq!(am.band, ModulationBand::Roughness);
    assert!((am.rate - 70.0).abs() < 1.0, "{am:?}");
    assert!((am.depth - 0.9).abs() <= 0.05, "{am:?}");
}

#[test]
fn origin_is_unmodulated() {
    let am = estimate_am(&render_at(DisplacementVector::ORIGIN, 1.0)).unwrap();
    assert_eq!(am.band, ModulationBand::None);
    assert!(am.depth < 0.01, "{am:?}");
}

#[test]
fn neutral_params_are_steady_over_two_seconds() {
    let audio = render_params(&SonificationParams::NEUTRAL, 2.0);
    let am = estimate_am(&audio).unwrap();
    assert!(am.depth < 0.01, "{am:?}");
    let first = estimate_spectral_balance(&audio.slice_seconds(0.0, 1.0)).unwrap();
    let second = estimate_spectral_balance(&audio.slice_seconds(1.0, 2.0)).unwrap();
    assert!((first.centroid_log2 - second.centroid_log2).abs() < 0.01);
    assert!((first.bandwidth_oct - second.bandwidth_oct).abs() < 0.01);
}

#[test]
fn brightness_shifts_centroid_two_octaves() {
    let zero = estimate_spectral_balance(&render_at(DisplacementVector::ORIGIN, 1.0)).unwrap();
    let up = estimate_spectral_balance(&render_at(dv(0.0, 0.0, 1.0), 1.0)).unwrap();
    let shift = up.centroid_log2 - zero.centroid_log2;
    assert!((shift - 2.0).abs() <= 0.3, "{shift}");
}

/// Oracle: the power-weighted log-frequency spread of the raised-cosine
/// envelope, integrated numerically here, times the added half-width.
#[test]
fn fullness_widens_bandwidth_by_envelope_geometry() {
    let n = 200_000;
    let (mut w, mut s2) = (0.0, 0.0);
    for i in 0..=n {
        let u = -1.0 + 2.0 * i as f64 / n as f64;
        let a = (std::f64::consts::FRAC_PI_2 * u).cos().powi(4);
        w += a;
        s2 += a * u * u;
    }
    let spread = (s2 / w).sqrt();
    assert!((spread - ENVELOPE_SPREAD).abs() < 1e-6);
    let expected = spread * MappingConfig::default().fullness_bandwidth_max;

    let zero = estimate_spectral_balance(&render_at(DisplacementVector::ORIGIN, 1.0)).unwrap();
    let full = estimate_spectral_balance(&render_at(dv(0.0, 0.0, -1.0), 1.0)).unwrap();
    let widening = full.bandwidth_oct - zero.bandwidth_oct;
    assert!((widening - expected).abs() < 0.05, "{widening} vs {expected}");
}

/// Literal target for the z = -1 bandwidth increase. The specified envelope
/// (half-width 2.5 → 5 octaves) raises the spread by only ~0.71 octaves; a
/// 1.5-octave rise would need more than ten extra octaves of envelope.
#[test]
#[ignore = "unattainable with the specified raised-cosine envelope; see README"]
fn fullness_widens_bandwidth_by_one_and_a_half_octaves() {
    let zero = estimate_spectral_balance(&render_at(DisplacementVector::ORIGIN, 1.0)).unwrap();
    let full = estimate_spectral_balance(&render_at(dv(0.0, 0.0, -1.0), 1.0)).unwrap();
    assert!(full.bandwidth_oct - zero.bandwidth_oct >= 1.5);
}

#[test]
fn centroid_independent_of_x() {
    let a = estimate_spectral_balance(&render_at(dv(0.9, 0.0, 0.0), 1.0)).unwrap();
    let b = estimate_spectral_balance(&render_at(dv(-0.4, 0.0, 0.0), 1.0)).unwrap();
    assert!((a.centroid_log2 - b.centroid_log2).abs() < 0.1);
}

#[test]
fn feature_frame_invariants() {
    let f = analyze(&render_at(dv(0.3, -0.2, 0.6), 1.0), 2.0).unwrap();
    assert!((0.0..=1.0).contains(&f.am_depth));
    assert!(f.chroma_rate.is_finite());
    assert_eq!(f.t_start, 2.0);
    assert!((f.t_end - 3.0).abs() < 1e-9);
    assert_eq!(f.modulation_band, ModulationBand::Beats);
}

fn decode(d: DisplacementVector) -> DisplacementVector {
    decode_position(&render_at(d, 1.0), &MappingConfig::default(), &SynthConfig::default()).unwrap()
}

#[test]
fn decodes_origin() {
    let d = decode(DisplacementVector::ORIGIN);
    assert!(d.max_abs_diff(&DisplacementVector::ORIGIN) <= 0.05, "{d:?}");
}

#[test]
fn decodes_mixed_position() {
    let truth = dv(0.5, -0.5, 0.25);
    let d = decode(truth);
    assert!(d.max_abs_diff(&truth) <= 0.05, "{d:?}");
}

#[test]
fn simultaneous_beats_and_roughness_are_ambiguous() {
    let p = SonificationParams { beat_rate: 3.0, beat_depth: 0.8, roughness_depth: 0.8, ..SonificationParams::NEUTRAL };
    let e = decode_position(&render_params(&p, 1.0), &MappingConfig::default(), &SynthConfig::default());
    assert!(matches!(e, Err(ProbeError::Ambiguous { .. })), "{e:?}");
}
