//! Psychoacoustic auditory guidance: maps a 3-D displacement from a target
//! onto independent auditory dimensions, synthesizes the resulting tone in
//! real time, and provides the signal probes used to verify (and decode)
//! what the listener hears.

// `!(a > b)` is deliberate throughout: NaN must fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod earcons;
pub mod mapping;
pub mod noise;
pub mod probes;
pub mod stream;
pub mod synth;
pub mod trajectory;
pub mod wav;

pub use audio::AudioBlock;
pub use earcons::{EarconEvent, EarconKind};
pub use mapping::{
    invert_params, map_position, DisplacementVector, MappingConfig, MappingError, Mode, SonificationParams,
};
pub use stream::{render_stream, render_trajectory, StreamError, StreamRender, StreamRenderer};
pub use synth::{Synth, SynthConfig, SynthError, SynthState};
pub use trajectory::{parse_trajectory, Trajectory, TrajectoryError, TrajectorySample};
