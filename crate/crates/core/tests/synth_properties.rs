mod common;

use proptest::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use sonic_guide::mapping::map_position;
use sonic_guide::{AudioBlock, MappingConfig, SonificationParams, Synth, SynthConfig};

fn synth() -> Synth {
    Synth::new(SynthConfig::default(), &MappingConfig::default()).unwrap()
}

fn run(s: &mut Synth, p: &SonificationParams, seconds: f64) -> AudioBlock {
    let mut out = vec![0.0; (seconds * 48_000.0).round() as usize];
    s.render_into(p, &mut out);
    AudioBlock::new(48_000, out)
}

fn third_octave_levels(x: &[f32], fs: f64) -> Vec<f64> {
    // Hann-weighted: every cycle starts at the same chroma phase, so the
    // weighting is identical across cycles while leakage stays low.
    let n = x.len() as f64;
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Complex::new(v as f64 * (0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n).cos()), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let bin = fs / buf.len() as f64;
    // Bands centred on 1 kHz · 2^(k/3), k = -10..=10 (100 Hz – 10 kHz).
    (-10..=10)
        .map(|k| {
            let fc = 1000.0 * 2f64.powf(k as f64 / 3.0);
            let (lo, hi) = (fc * 2f64.powf(-1.0 / 6.0), fc * 2f64.powf(1.0 / 6.0));
            let e: f64 = buf[..buf.len() / 2]
                .iter()
                .enumerate()
                .filter(|(i, _)| (lo..hi).contains(&(*i as f64 * bin)))
                .map(|(_, c)| c.norm_sqr())
                .sum();
            10.0 * e.max(1e-30).log10()
        })
        .collect()
}

/// Long-term spectra over consecutive whole chroma cycles agree within
/// 1 dB per third-octave band: the register does not drift.
#[test]
fn shepard_invariance() {
    let cfg = MappingConfig::default();
    for x in [0.5f32, -0.8] {
        let p = map_position(&common::dv(x, 0.0, 0.0), &cfg).unwrap();
        let mut s = synth();
        run(&mut s, &p, common::SETTLE);
        let cycle = (48_000.0 / p.chroma_velocity.abs()).round() as usize;
        let audio = run(&mut s, &p, 3.0 * cycle as f64 / 48_000.0);
        let bands: Vec<Vec<f64>> = audio.frames.chunks_exact(cycle).map(|c| third_octave_levels(c, 48_000.0)).collect();
        let top = bands[0].iter().cloned().fold(f64::MIN, f64::max);
        for other in &bands[1..] {
            for (k, (a, b)) in bands[0].iter().zip(other).enumerate() {
                if *a > top - 40.0 {
                    assert!((a - b).abs() <= 1.0, "x={x} band {k}: {a:.2} vs {b:.2} dB");
                }
            }
        }
    }
}

fn params() -> impl Strategy<Value = SonificationParams> {
    (-1.0f32..=1.0, -1.0f32..=1.0, -1.0f32..=1.0)
        .prop_map(|(x, y, z)| map_position(&common::dv(x, y, z), &MappingConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// A parameter step produces no sample jump beyond the steady-state
    /// maximum of either endpoint + 10%.
    #[test]
    fn parameter_steps_do_not_click(a in params(), b in params()) {
        // Steady state spans a whole beat cycle, crest included. Very slow
        // beats are shallow and start near the crest anyway.
        let steady = |p: &SonificationParams| {
            let mut s = synth();
            run(&mut s, p, common::SETTLE);
            let window = if p.beat_rate > 0.0 { (1.0 / p.beat_rate).clamp(0.5, 20.0) } else { 0.5 };
            run(&mut s, p, window).max_step()
        };
        let bound = steady(&a).max(steady(&b)) * 1.1;
        let mut s = synth();
        run(&mut s, &a, common::SETTLE);
        let mut joined = run(&mut s, &a, 0.05).frames;
        joined.extend(run(&mut s, &b, 0.3).frames);
        let jump = AudioBlock::new(48_000, joined).max_step();
        prop_assert!(jump <= bound, "jump {} > bound {}", jump, bound);
    }

    #[test]
    fn output_stays_in_unit_range(p in params()) {
        let mut s = synth();
        let out = run(&mut s, &p, 0.2);
        prop_assert!(out.frames.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn identical_inputs_give_identical_blocks(p in params(), q in params()) {
        let mut a = synth();
        let mut b = synth();
        for target in [&p, &q, &p] {
            let x = a.render_block(target);
            let y = b.render_block(target);
            prop_assert!(x.frames.iter().zip(&y.frames).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        prop_assert_eq!(a.state(), b.state());
    }
}
