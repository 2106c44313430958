//! Wire protocol: newline-delimited JSON over a local stream socket.
//!
//! Client → server: `hello`, `pos`, `start_trial`, `abort`.
//! Server → client: `hello`, `audio`, `event`, `trial_started`,
//! `trial_result`, `error`.
//!
//! Audio travels as base64 of 256-frame mono blocks of 16-bit
//! little-endian PCM, quantized exactly as the WAV writer does.

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sonic_guide::wav::{dequantize_i16, quantize_i16};
use sonic_guide::{EarconKind, Mode};
use thiserror::Error;

use crate::session::TrialRecord;

pub const PROTOCOL_VERSION: u32 = 1;
pub const AUDIO_FORMAT: &str = "pcm16le";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("bad audio payload: {0}")]
    BadAudio(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello {
        /// Omitted means the current version.
        #[serde(default)]
        version: Option<u32>,
        #[serde(default)]
        mode: Option<Mode>,
    },
    Pos {
        t: f64,
        x: f32,
        y: f32,
        #[serde(default)]
        z: f32,
    },
    StartTrial {
        #[serde(default)]
        mode: Option<Mode>,
        #[serde(default)]
        start_distance: Option<f64>,
        #[serde(default)]
        seed: Option<u64>,
    },
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        version: u32,
        session: u64,
        rate: u32,
        block_size: usize,
        mode: Mode,
    },
    Audio {
        seq: u64,
        format: String,
        rate: u32,
        /// Stream time of the block's first frame, seconds.
        t: f64,
        data: String,
    },
    Event {
        kind: EarconKind,
        t: f64,
    },
    TrialStarted {
        trial: u64,
        t: f64,
        mode: Mode,
        start: [f32; 3],
        target_radius: f64,
    },
    TrialResult(Box<TrialRecord>),
    Error {
        message: String,
        /// The server closes the connection after a fatal error.
        #[serde(default)]
        fatal: bool,
    },
}

pub fn parse_client(line: &str) -> Result<ClientMessage, ProtocolError> {
    serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

pub fn parse_server(line: &str) -> Result<ServerMessage, ProtocolError> {
    serde_json::from_str(line).map_err(|e| ProtocolError::Malformed(e.to_string()))
}

/// One JSON line, without the trailing newline.
pub fn encode<T: Serialize>(msg: &T) -> String {
    // Message types contain only JSON-representable data.
    serde_json::to_string(msg).expect("protocol messages always serialize")
}

pub fn encode_pcm16(frames: &[f32]) -> String {
    let mut bytes = Vec::with_capacity(frames.len() * 2);
    for &s in frames {
        bytes.extend_from_slice(&quantize_i16(s).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_pcm16(data: &str) -> Result<Vec<i16>, ProtocolError> {
    let bytes = STANDARD.decode(data).map_err(|e| ProtocolError::BadAudio(e.to_string()))?;
    if bytes.len() % 2 != 0 {
        return Err(ProtocolError::BadAudio(format!("odd byte count {}", bytes.len())));
    }
    Ok(bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect())
}

pub fn pcm16_to_f32(samples: &[i16]) -> Vec<f32> {
    samples.iter().map(|&s| dequantize_i16(s)).collect()
}

pub fn audio_message(seq: u64, rate: u32, t: f64, frames: &[f32]) -> ServerMessage {
    ServerMessage::Audio { seq, format: AUDIO_FORMAT.to_string(), rate, t, data: encode_pcm16(frames) }
}
