//! Closed-loop simulated operator: listens to its own audio through the
//! probes, decodes where the target is, and moves toward it.

use serde::Serialize;
use sonic_guide::probes::Decoder;
use sonic_guide::{AudioBlock, DisplacementVector, MappingConfig, Mode, SynthConfig};

use crate::session::{Outcome, Session, SessionConfig, SessionError, SessionOutput, TrialRecord, TrialSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub trials: usize,
    /// Audio analysed per step, seconds.
    pub analysis_window: f64,
    /// Wait after arriving before listening, so parameter smoothing settles.
    pub settle: f64,
    /// Time spent travelling between positions.
    pub move_time: f64,
    pub step_gain: f64,
    pub max_step: f64,
    pub max_steps: u32,
    pub seed: u64,
    pub mode: Mode,
    pub start_distance: f64,
    pub target_radius: f64,
    pub synth: SynthConfig,
    pub mapping: MappingConfig,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            trials: 100,
            analysis_window: 1.0,
            settle: 0.25,
            move_time: 0.1,
            step_gain: 0.5,
            max_step: 0.2,
            max_steps: 50,
            seed: 0,
            mode: Mode::ThreeD,
            start_distance: 0.8,
            target_radius: 0.063,
            synth: SynthConfig::default(),
            mapping: MappingConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorSummary {
    pub trials: usize,
    pub hits: usize,
    pub hit_rate: f64,
    pub median_steps: Option<f64>,
    pub median_time: Option<f64>,
    pub decoder_errors: u32,
}

impl OperatorSummary {
    pub fn from_records(records: &[TrialRecord]) -> Self {
        let hits: Vec<&TrialRecord> = records.iter().filter(|r| r.outcome == Outcome::Hit).collect();
        let steps: Vec<f64> = hits.iter().filter_map(|r| r.steps).map(f64::from).collect();
        let times: Vec<f64> = hits.iter().filter_map(|r| r.time_to_target).collect();
        OperatorSummary {
            trials: records.len(),
            hits: hits.len(),
            hit_rate: if records.is_empty() { 0.0 } else { hits.len() as f64 / records.len() as f64 },
            median_steps: median(steps),
            median_time: median(times),
            decoder_errors: records.iter().filter_map(|r| r.decoder_errors).sum(),
        }
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Runs `cfg.trials` independent seeded trials (trial `i` uses seed
/// `cfg.seed + i`). Results are deterministic regardless of thread count.
pub fn run_simulated_operator(cfg: &OperatorConfig) -> Result<Vec<TrialRecord>, SessionError> {
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    }
    .clamp(1, cfg.trials.max(1));
    let mut slots: Vec<Option<Result<TrialRecord, SessionError>>> = vec![None; cfg.trials];
    std::thread::scope(|s| {
        for (w, chunk) in slots.chunks_mut(cfg.trials.div_ceil(threads).max(1)).enumerate() {
            let base = w * cfg.trials.div_ceil(threads).max(1);
            s.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let i = base + k;
                    *slot = Some(run_trial(cfg, i as u64 + 1, cfg.seed.wrapping_add(i as u64)));
                }
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every slot is filled")).collect()
}

/// One trial in a fresh session.
pub fn run_trial(cfg: &OperatorConfig, id: u64, seed: u64) -> Result<TrialRecord, SessionError> {
    let mapping = MappingConfig { target_radius: cfg.target_radius, ..cfg.mapping };
    let scfg = SessionConfig {
        synth: cfg.synth,
        mapping,
        mode: cfg.mode,
        // Trials end by step budget, never by wall time.
        trial_timeout: f64::INFINITY,
        ..SessionConfig::default()
    };
    let decoder = Decoder::new(mapping, &cfg.synth);
    let mut session = Session::new(id, scfg)?;
    let started = session
        .start_trial(TrialSpec { mode: Some(cfg.mode), start_distance: Some(cfg.start_distance), seed }, &mut |_| {})?;
    let mut pos = started.start;
    // Anchors the session clock at 0.
    session.update_position(0.0, pos, &mut |_| {})?;

    let rate = cfg.synth.sample_rate;
    let needed = (cfg.analysis_window * rate as f64).round() as usize;
    let margin = 2.0 * cfg.synth.block_duration();
    let mut t = 0.0;
    let mut last_step: Option<DisplacementVector> = None;
    let mut first = true;

    for _ in 0..cfg.max_steps {
        session.note_step(false);
        let mut ended = None;
        if !first {
            t += cfg.move_time;
            if let Some(r) = session.update_position(t, pos, &mut |_| {})?.ended {
                ended = Some(r);
            }
        }
        first = false;
        let listen_from = t + cfg.settle;
        let hold_until = listen_from + cfg.analysis_window + margin;
        let mut frames: Vec<f32> = Vec::with_capacity(needed + 512);
        if ended.is_none() {
            let update = session.update_position(hold_until, pos, &mut |out| {
                if let SessionOutput::Audio { t: bt, frames: f, .. } = out {
                    if bt >= listen_from - 1e-9 && frames.len() < needed {
                        frames.extend_from_slice(f);
                    }
                }
            })?;
            ended = update.ended;
        }
        t = hold_until;
        if let Some(mut rec) = ended {
            rec.trial = id;
            return Ok(rec);
        }
        frames.truncate(needed);
        let audio = AudioBlock::new(rate, frames);
        let step = match decoder.decode(&audio) {
            Ok(mut d) => {
                if cfg.mode == Mode::TwoD {
                    d.z = 0.0;
                }
                scale_step(&d, -cfg.step_gain, cfg.max_step)
            }
            Err(_) => {
                session.note_decoder_error();
                match last_step {
                    Some(s) => scale_step(&s, 0.5, f64::INFINITY),
                    None => DisplacementVector::ORIGIN,
                }
            }
        };
        last_step = Some(step);
        pos = DisplacementVector { x: pos.x + step.x, y: pos.y + step.y, z: pos.z + step.z }.clamped();
    }
    let mut rec = session.finish(Outcome::Timeout)?;
    rec.trial = id;
    Ok(rec)
}

fn scale_step(d: &DisplacementVector, gain: f64, cap: f64) -> DisplacementVector {
    let mut s = [d.x as f64 * gain, d.y as f64 * gain, d.z as f64 * gain];
    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
    if n > cap {
        s = s.map(|c| c * cap / n);
    }
    DisplacementVector { x: s[0] as f32, y: s[1] as f32, z: s[2] as f32 }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_scaled_and_capped() {
        let d = DisplacementVector { x: 0.8, y: 0.0, z: 0.0 };
        let s = scale_step(&d, -0.5, 0.2);
        assert!((s.x + 0.2).abs() < 1e-6 && s.y == 0.0);
        let s = scale_step(&DisplacementVector { x: 0.1, y: 0.0, z: 0.0 }, -0.5, 0.2);
        assert!((s.x + 0.05).abs() < 1e-6);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
