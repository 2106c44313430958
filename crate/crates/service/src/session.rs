//! Sans-IO session engine: trials, position updates, dwell detection and
//! logging. The socket server and the simulated operator both drive this
//! type, and all audio comes from its [`StreamRenderer`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sonic_guide::mapping::in_target_zone;
use sonic_guide::{
    DisplacementVector, EarconEvent, MappingConfig, Mode, StreamError, StreamRenderer, SynthConfig, Trajectory,
    TrajectoryError, TrajectorySample,
};
use thiserror::Error;

use crate::log::{LogRecord, LogSink, NullLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("a trial is already active")]
    TrialActive,
    #[error("no active trial")]
    NoTrial,
    #[error("stale timestamp {t} (previous {prev})")]
    Stale { t: f64, prev: f64 },
    #[error("non-finite position or time")]
    NonFinite,
    #[error("invalid start distance {0}")]
    InvalidStartDistance(f64),
    #[error(transparent)]
    Stream(#[from] StreamError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionConfig {
    pub synth: SynthConfig,
    pub mapping: MappingConfig,
    pub mode: Mode,
    /// Time inside the target zone that counts as a hit, seconds.
    pub dwell_time: f64,
    pub start_distance: f64,
    /// A trial still running after this long ends as a timeout, seconds.
    pub trial_timeout: f64,
    /// Target in workspace coordinates; displacement = position − target.
    pub target: DisplacementVector,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            synth: SynthConfig::default(),
            mapping: MappingConfig::default(),
            mode: Mode::ThreeD,
            dwell_time: 0.5,
            start_distance: 0.8,
            trial_timeout: 120.0,
            target: DisplacementVector::ORIGIN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Hit,
    Timeout,
    Abort,
}

/// Everything measured about one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub mode: Mode,
    pub start_time: f64,
    pub end_time: f64,
    pub start_position: [f32; 3],
    pub target_radius: f64,
    pub outcome: Outcome,
    /// Seconds from start to the hit (`None` unless the outcome is a hit).
    pub time_to_target: Option<f64>,
    /// Length of the traversed path, normalized units.
    pub path_length: f64,
    /// Displacements accepted during the trial.
    pub path: Vec<TrajectorySample>,
    pub events: Vec<EarconEvent>,
    /// Analysis steps taken (simulated operator only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<u32>,
    /// Decoder failures met along the way (simulated operator only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder_errors: Option<u32>,
}

impl TrialRecord {
    pub fn trajectory(&self) -> Result<Trajectory, TrajectoryError> {
        Trajectory::new(self.path.clone(), self.mode)
    }

    pub fn final_position(&self) -> Option<DisplacementVector> {
        self.path.last().map(|s| s.d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub mode: Option<Mode>,
    pub start_distance: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStarted {
    pub trial: u64,
    pub t: f64,
    pub mode: Mode,
    pub start: DisplacementVector,
    pub target_radius: f64,
}

/// Something the session produced while processing an input.
#[derive(Debug)]
pub enum SessionOutput<'a> {
    Audio { seq: u64, t: f64, frames: &'a [f32] },
    Event(EarconEvent),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Update {
    pub events: Vec<EarconEvent>,
    pub ended: Option<TrialRecord>,
}

#[derive(Debug)]
struct ActiveTrial {
    id: u64,
    seed: u64,
    mode: Mode,
    start_time: f64,
    start: DisplacementVector,
    path: Vec<TrajectorySample>,
    events: Vec<EarconEvent>,
    zone_since: Option<f64>,
    steps: Option<u32>,
    decoder_errors: Option<u32>,
}

pub struct Session {
    id: u64,
    cfg: SessionConfig,
    mode: Mode,
    renderer: StreamRenderer,
    log: Box<dyn LogSink>,
    /// Client time that maps to session time 0.
    epoch: Option<f64>,
    last_t: Option<f64>,
    seq: u64,
    trial: Option<ActiveTrial>,
    next_trial: u64,
}

impl Session {
    pub fn new(id: u64, cfg: SessionConfig) -> Result<Self, SessionError> {
        Self::with_log(id, cfg, Box::new(NullLog))
    }

    pub fn with_log(id: u64, cfg: SessionConfig, log: Box<dyn LogSink>) -> Result<Self, SessionError> {
        let renderer = StreamRenderer::new(cfg.synth, cfg.mapping, cfg.mode)?;
        Ok(Session {
            id,
            mode: cfg.mode,
            cfg,
            renderer,
            log,
            epoch: None,
            last_t: None,
            seq: 0,
            trial: None,
            next_trial: 1,
        })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        self.renderer.set_mode(mode);
    }

    pub fn trial_active(&self) -> bool {
        self.trial.is_some()
    }

    /// Latest accepted session time.
    pub fn last_time(&self) -> Option<f64> {
        self.last_t
    }

    /// Session time of a client timestamp (the first timestamp seen is 0).
    pub fn session_time(&self, client_t: f64) -> f64 {
        client_t - self.epoch.unwrap_or(client_t)
    }

    /// Starts a trial at a seeded random position `start_distance` from the
    /// target; the operator is placed there immediately.
    pub fn start_trial(
        &mut self,
        spec: TrialSpec,
        emit: &mut dyn FnMut(SessionOutput<'_>),
    ) -> Result<TrialStarted, SessionError> {
        if self.trial.is_some() {
            return Err(SessionError::TrialActive);
        }
        let distance = spec.start_distance.unwrap_or(self.cfg.start_distance);
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(SessionError::InvalidStartDistance(distance));
        }
        let mode = spec.mode.unwrap_or(self.mode);
        self.set_mode(mode);
        let start = sample_start(spec.seed, mode, distance);
        let t = self.last_t.unwrap_or(0.0);
        let id = self.next_trial;
        self.next_trial += 1;
        self.trial = Some(ActiveTrial {
            id,
            seed: spec.seed,
            mode,
            start_time: t,
            start,
            path: Vec::new(),
            events: Vec::new(),
            zone_since: None,
            steps: None,
            decoder_errors: None,
        });
        self.log.record(&LogRecord::TrialStart {
            trial: id,
            t,
            mode,
            start: [start.x, start.y, start.z],
            target_radius: self.cfg.mapping.target_radius,
            seed: spec.seed,
        });
        let workspace = DisplacementVector {
            x: start.x + self.cfg.target.x,
            y: start.y + self.cfg.target.y,
            z: start.z + self.cfg.target.z,
        };
        // Before the first client timestamp the clock is not anchored yet, and
        // that first position will replace this one at session time 0, so
        // nothing is rendered from the injected start.
        let render = self.epoch.is_some();
        self.accept(t, workspace, render, emit)?;
        Ok(TrialStarted { trial: id, t, mode, start, target_radius: self.cfg.mapping.target_radius })
    }

    /// Feeds a client position. Stale or non-finite input is rejected and
    /// leaves the session untouched.
    pub fn update_position(
        &mut self,
        client_t: f64,
        p: DisplacementVector,
        emit: &mut dyn FnMut(SessionOutput<'_>),
    ) -> Result<Update, SessionError> {
        if !client_t.is_finite() || !p.is_finite() {
            return Err(SessionError::NonFinite);
        }
        let t = self.session_time(client_t);
        if let Some(prev) = self.last_t {
            if t < prev {
                return Err(SessionError::Stale { t, prev });
            }
        }
        self.epoch.get_or_insert(client_t);
        self.accept(t, p, true, emit)
    }

    fn accept(
        &mut self,
        t: f64,
        p: DisplacementVector,
        render: bool,
        emit: &mut dyn FnMut(SessionOutput<'_>),
    ) -> Result<Update, SessionError> {
        let mut p = p;
        if self.mode == Mode::TwoD {
            p.z = self.cfg.target.z;
        }
        let d = p.sub(&self.cfg.target);
        self.renderer.push_position(t, d)?;
        self.last_t = Some(t);

        let trial_id = self.trial.as_ref().map(|tr| tr.id);
        self.log.record(&LogRecord::Pos { t, x: p.x, y: p.y, z: p.z, trial: trial_id });
        if let Some(tr) = self.trial.as_mut() {
            match tr.path.last_mut() {
                Some(last) if last.t == t => last.d = d,
                _ => tr.path.push(TrajectorySample { t, d }),
            }
        }

        let mut update = Update::default();
        let (seq, log, trial) = (&mut self.seq, &mut self.log, &mut self.trial);
        if render {
            self.renderer.render_ready(|block| {
                emit(SessionOutput::Audio { seq: *seq, t: block.start_time, frames: block.frames });
                *seq += 1;
                for e in block.events {
                    log.record(&LogRecord::Event { t: e.time, kind: e.kind, trial: trial.as_ref().map(|tr| tr.id) });
                    if let Some(tr) = trial.as_mut() {
                        tr.events.push(*e);
                    }
                    update.events.push(*e);
                    emit(SessionOutput::Event(*e));
                }
            });
        }

        let dwell = self.cfg.dwell_time;
        let timeout = self.cfg.trial_timeout;
        let inside = in_target_zone(&d, &self.cfg.mapping);
        let mut outcome = None;
        if let Some(tr) = self.trial.as_mut() {
            if inside {
                let since = *tr.zone_since.get_or_insert(t);
                if t - since >= dwell - 1e-9 {
                    outcome = Some(Outcome::Hit);
                }
            } else {
                tr.zone_since = None;
            }
            if outcome.is_none() && t - tr.start_time >= timeout {
                outcome = Some(Outcome::Timeout);
            }
        }
        if let Some(o) = outcome {
            update.ended = Some(self.end_trial(o, t));
        }
        Ok(update)
    }

    /// Ends the active trial as aborted.
    pub fn abort(&mut self) -> Result<TrialRecord, SessionError> {
        if self.trial.is_none() {
            return Err(SessionError::NoTrial);
        }
        let t = self.last_t.unwrap_or(0.0);
        Ok(self.end_trial(Outcome::Abort, t))
    }

    /// Operator bookkeeping carried into the trial record.
    pub fn note_step(&mut self, decoder_error: bool) {
        if let Some(tr) = self.trial.as_mut() {
            *tr.steps.get_or_insert(0) += 1;
            let errs = tr.decoder_errors.get_or_insert(0);
            if decoder_error {
                *errs += 1;
            }
        }
    }

    pub fn note_decoder_error(&mut self) {
        if let Some(tr) = self.trial.as_mut() {
            *tr.decoder_errors.get_or_insert(0) += 1;
        }
    }

    /// Ends the trial with `outcome` at the latest accepted time.
    pub fn finish(&mut self, outcome: Outcome) -> Result<TrialRecord, SessionError> {
        if self.trial.is_none() {
            return Err(SessionError::NoTrial);
        }
        let t = self.last_t.unwrap_or(0.0);
        Ok(self.end_trial(outcome, t))
    }

    fn end_trial(&mut self, outcome: Outcome, t: f64) -> TrialRecord {
        let tr = self.trial.take().expect("caller checked for an active trial");
        let path_length = tr.path.windows(2).map(|w| w[1].d.sub(&w[0].d).norm()).sum();
        let record = TrialRecord {
            trial: tr.id,
            seed: tr.seed,
            mode: tr.mode,
            start_time: tr.start_time,
            end_time: t,
            start_position: [tr.start.x, tr.start.y, tr.start.z],
            target_radius: self.cfg.mapping.target_radius,
            outcome,
            time_to_target: (outcome == Outcome::Hit).then_some(t - tr.start_time),
            path_length,
            path: tr.path,
            events: tr.events,
            steps: tr.steps,
            decoder_errors: tr.decoder_errors,
        };
        self.log.record(&LogRecord::TrialEnd(Box::new(record.clone())));
        record
    }
}

/// Uniform direction on the sphere (circle in 2D) from `seed`, scaled to
/// `distance`, then nudged by a few ULPs so the `f32` point lies within
/// 1e-9 of the requested radius.
pub fn sample_start(seed: u64, mode: Mode, distance: f64) -> DisplacementVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir: [f64; 3] = match mode {
        Mode::TwoD => {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            [a.cos(), a.sin(), 0.0]
        }
        Mode::ThreeD => loop {
            let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let n2: f64 = v.iter().map(|c| c * c).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                let n = n2.sqrt();
                break [v[0] / n, v[1] / n, v[2] / n];
            }
        },
    };
    if distance == 0.0 {
        return DisplacementVector::ORIGIN;
    }
    let coords = dir.map(|c| (c * distance) as f32);
    snap_to_radius(coords, distance, mode)
}

fn nudge(x: f32, k: i32) -> Option<f32> {
    if x == 0.0 {
        return (k == 0).then_some(0.0);
    }
    let bits = x.to_bits() as i64;
    let mag = bits & 0x7fff_ffff;
    let m = mag + k as i64;
    (m > 0 && m < 0x7f80_0000).then(|| f32::from_bits(((bits & !0x7fff_ffff) | m) as u32))
}

/// Searches ULP nudges of the larger coordinates, solving the smallest one
/// exactly each time, for the `f32` point whose norm is closest to `r`.
fn snap_to_radius(c: [f32; 3], r: f64, mode: Mode) -> DisplacementVector {
    let dims = if mode == Mode::TwoD { 2 } else { 3 };
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| c[b].abs().total_cmp(&c[a].abs()));
    let solve = order[dims - 1];
    let nudged = &order[..dims - 1];
    let reach: i32 = if dims == 2 { 512 } else { 24 };
    let norm = |v: &[f32; 3]| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();

    let mut best = (c, (norm(&c) - r).abs());
    let mut try_point = |mut v: [f32; 3]| {
        let rest: f64 = (0..3).filter(|&i| i != solve).map(|i| (v[i] as f64).powi(2)).sum();
        let exact = (r * r - rest).max(0.0).sqrt().copysign(c[solve] as f64) as f32;
        for k in -2..=2 {
            let Some(s) = nudge(exact, k) else { continue };
            v[solve] = s;
            let e = (norm(&v) - r).abs();
            if e < best.1 {
                best = (v, e);
            }
        }
    };
    match nudged {
        [a] => {
            for i in -reach..=reach {
                let Some(x) = nudge(c[*a], i) else { continue };
                let mut v = c;
                v[*a] = x;
                try_point(v);
            }
        }
        [a, b] => {
            for i in -reach..=reach {
                let Some(x) = nudge(c[*a], i) else { continue };
                for j in -reach..=reach {
                    let Some(y) = nudge(c[*b], j) else { continue };
                    let mut v = c;
                    v[*a] = x;
                    v[*b] = y;
                    try_point(v);
                }
            }
        }
        _ => unreachable!("two or three dimensions"),
    }
    let [x, y, z] = best.0;
    DisplacementVector { x, y, z }
}
