//! Timeline-driven rendering: positions in, blocks of audio and cues out.
//!
//! [`StreamRenderer`] is shared by the offline renderer and the live
//! service, which is what makes their outputs bit-identical. Each block
//! takes its control position from the timeline at the block's start time
//! (linear interpolation, held after the last sample), maps it, runs the
//! crossing detector against the previous block's position, triggers any
//! earcons and renders.
//!
//! A block can be rendered as soon as the timeline reaches its start time:
//! later positions never change an earlier block.

use thiserror::Error;

use crate::audio::AudioBlock;
use crate::earcons::{detect_events, CrossingState, EarconEvent};
use crate::mapping::{map_position, DisplacementVector, MappingConfig, Mode, SonificationParams};
use crate::synth::{Synth, SynthConfig, SynthError};
use crate::trajectory::{interpolate, Trajectory, TrajectorySample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("position sequence is empty")]
    Empty,
    #[error("timestamp {t} is earlier than the previous one ({prev})")]
    Stale { t: f64, prev: f64 },
    #[error("timestamps must strictly increase: {t} after {prev}")]
    NonMonotone { t: f64, prev: f64 },
    #[error("non-finite position or time at t = {t}")]
    NonFinite { t: f64 },
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// One rendered block, borrowed from the renderer.
#[derive(Debug)]
pub struct BlockOutput<'a> {
    pub index: u64,
    pub start_time: f64,
    pub position: DisplacementVector,
    pub frames: &'a [f32],
    pub events: &'a [EarconEvent],
}

#[derive(Debug, Clone)]
pub struct StreamRenderer {
    synth: Synth,
    mapping: MappingConfig,
    mode: Mode,
    timeline: Vec<TrajectorySample>,
    crossing: Option<CrossingState>,
    next_index: u64,
    block: Vec<f32>,
    events: Vec<EarconEvent>,
    last_position: DisplacementVector,
    earcons: bool,
}

const PRUNE_THRESHOLD: usize = 1024;

impl StreamRenderer {
    pub fn new(synth_cfg: SynthConfig, mapping: MappingConfig, mode: Mode) -> Result<Self, StreamError> {
        let synth = Synth::new(synth_cfg, &mapping)?;
        Ok(StreamRenderer {
            block: vec![0.0; synth_cfg.block_size],
            synth,
            mapping,
            mode,
            timeline: Vec::new(),
            crossing: None,
            next_index: 0,
            events: Vec::with_capacity(8),
            last_position: DisplacementVector::ORIGIN,
            earcons: true,
        })
    }

    /// Whether detected cues are mixed into the audio. Events are reported
    /// either way.
    pub fn set_earcons(&mut self, enabled: bool) {
        self.earcons = enabled;
    }

    pub fn synth(&self) -> &Synth {
        &self.synth
    }

    pub fn mapping(&self) -> &MappingConfig {
        &self.mapping
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Switches crossing-cue semantics (2D click on `y`, 3D on `z`) for
    /// subsequent blocks.
    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn last_time(&self) -> Option<f64> {
        self.timeline.last().map(|s| s.t)
    }

    pub fn next_block_index(&self) -> u64 {
        self.next_index
    }

    pub fn next_block_start(&self) -> f64 {
        self.block_start(self.next_index)
    }

    pub fn block_start(&self, index: u64) -> f64 {
        let cfg = self.synth.config();
        (index * cfg.block_size as u64) as f64 / cfg.sample_rate as f64
    }

    /// Appends a position. Equal timestamps replace the previous sample
    /// (latest wins); earlier ones are rejected and leave state untouched.
    pub fn push_position(&mut self, t: f64, d: DisplacementVector) -> Result<(), StreamError> {
        if !t.is_finite() || !d.is_finite() {
            return Err(StreamError::NonFinite { t });
        }
        if let Some(last) = self.timeline.last_mut() {
            if t < last.t {
                return Err(StreamError::Stale { t, prev: last.t });
            }
            if t == last.t {
                last.d = d;
                return Ok(());
            }
        }
        self.timeline.push(TrajectorySample { t, d });
        Ok(())
    }

    /// Whether the timeline already covers the next block's start.
    pub fn block_ready(&self) -> bool {
        self.last_time().is_some_and(|t| t >= self.next_block_start())
    }

    /// Renders every block whose start time the timeline has reached.
    pub fn render_ready(&mut self, mut sink: impl FnMut(BlockOutput<'_>)) {
        while self.block_ready() {
            let out = self.render_next();
            sink(out);
        }
    }

    /// Renders the next block unconditionally, holding the last position if
    /// the timeline has not reached it yet.
    pub fn render_next(&mut self) -> BlockOutput<'_> {
        let index = self.next_index;
        let start = self.block_start(index);
        let position =
            if self.timeline.is_empty() { DisplacementVector::ORIGIN } else { interpolate(&self.timeline, start) };
        self.prune(start);

        let params = if self.timeline.is_empty() {
            SonificationParams::NEUTRAL
        } else {
            // Positions are validated on push, so this cannot fail.
            map_position(&position, &self.mapping).unwrap_or(SonificationParams::NEUTRAL)
        };

        self.events.clear();
        match self.crossing.as_mut() {
            None => self.crossing = Some(CrossingState::new(&position, &self.mapping)),
            Some(state) => detect_events(&position, state, &self.mapping, self.mode, start, &mut self.events),
        }
        if self.earcons {
            for e in &self.events {
                self.synth.trigger(e.kind);
            }
        }
        self.synth.render_into(&params, &mut self.block);
        self.next_index += 1;
        self.last_position = position;
        BlockOutput { index, start_time: start, position, frames: &self.block, events: &self.events }
    }

    /// Drops samples that can no longer influence future blocks.
    fn prune(&mut self, now: f64) {
        let keep_from = self.timeline.partition_point(|s| s.t <= now).saturating_sub(1);
        if keep_from >= PRUNE_THRESHOLD {
            self.timeline.drain(..keep_from);
        }
    }
}

/// Offline render result.
#[derive(Debug, Clone)]
pub struct StreamRender {
    pub audio: AudioBlock,
    pub events: Vec<EarconEvent>,
}

/// Renders a position timeline to audio. Output lasts `duration` seconds
/// (default: the last timestamp); the final position is held after its
/// sample.
pub fn render_stream(
    positions: &[(f64, DisplacementVector)],
    duration: Option<f64>,
    mode: Mode,
    synth_cfg: &SynthConfig,
    mapping: &MappingConfig,
) -> Result<StreamRender, StreamError> {
    let (first, rest) = positions.split_first().ok_or(StreamError::Empty)?;
    let mut prev = first.0;
    for &(t, _) in rest {
        if !(t > prev) {
            return Err(StreamError::NonMonotone { t, prev });
        }
        prev = t;
    }
    let duration = duration.unwrap_or(prev);
    if !(duration >= 0.0) {
        return Err(StreamError::NegativeDuration(duration));
    }

    let mut r = StreamRenderer::new(*synth_cfg, *mapping, mode)?;
    for &(t, d) in positions {
        r.push_position(t, d)?;
    }
    let total = (duration * synth_cfg.sample_rate as f64).round() as usize;
    let mut frames = Vec::with_capacity(total + synth_cfg.block_size);
    let mut events = Vec::new();
    while frames.len() < total {
        let out = r.render_next();
        frames.extend_from_slice(out.frames);
        events.extend_from_slice(out.events);
    }
    frames.truncate(total);
    Ok(StreamRender { audio: AudioBlock::new(synth_cfg.sample_rate, frames), events })
}

/// [`render_stream`] over a validated trajectory, using its mode.
pub fn render_trajectory(
    traj: &Trajectory,
    duration: Option<f64>,
    synth_cfg: &SynthConfig,
    mapping: &MappingConfig,
) -> Result<StreamRender, StreamError> {
    let pts: Vec<_> = traj.samples().iter().map(|s| (s.t, s.d)).collect();
    render_stream(&pts, duration, traj.mode(), synth_cfg, mapping)
}
