//! Mono RIFF/WAVE I/O, 16-bit PCM or 32-bit float.
//!
//! The container is handled by `hound`; 16-bit quantization is done here so
//! the rounding rule is fixed: scale by 32768, round half away from zero,
//! saturate to the `i16` range, no dither.

use std::io::{Read, Seek, Write};
use std::path::Path;

use thiserror::Error;

use crate::audio::AudioBlock;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed WAV: {0}")]
    Malformed(String),
    #[error("unsupported WAV layout: {0}")]
    Unsupported(String),
}

impl From<hound::Error> for WavError {
    fn from(e: hound::Error) -> Self {
        match e {
            hound::Error::IoError(io) => WavError::Io(io),
            hound::Error::Unsupported => WavError::Unsupported("format not supported".into()),
            other => WavError::Malformed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SampleFormat {
    #[default]
    Pcm16,
    Float32,
}

/// Quantizes one sample to 16-bit PCM.
#[inline]
pub fn quantize_i16(s: f32) -> i16 {
    (s as f64 * 32768.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

#[inline]
pub fn dequantize_i16(v: i16) -> f32 {
    v as f32 / 32768.0
}

fn spec(sample_rate: u32, format: SampleFormat) -> hound::WavSpec {
    match format {
        SampleFormat::Pcm16 => {
            hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int }
        }
        SampleFormat::Float32 => {
            hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 32, sample_format: hound::SampleFormat::Float }
        }
    }
}

pub fn write_wav_to<W: Write + Seek>(audio: &AudioBlock, writer: W, format: SampleFormat) -> Result<(), WavError> {
    let mut w = hound::WavWriter::new(writer, spec(audio.sample_rate, format))?;
    match format {
        SampleFormat::Pcm16 => {
            let mut iw = w.get_i16_writer(audio.frames.len() as u32);
            for &s in &audio.frames {
                iw.write_sample(quantize_i16(s));
            }
            iw.flush()?;
        }
        SampleFormat::Float32 => {
            for &s in &audio.frames {
                w.write_sample(s)?;
            }
        }
    }
    w.finalize()?;
    Ok(())
}

pub fn write_wav(audio: &AudioBlock, path: impl AsRef<Path>, format: SampleFormat) -> Result<(), WavError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_wav_to(audio, file, format)
}

pub fn read_wav_from<R: Read>(reader: R) -> Result<AudioBlock, WavError> {
    let r = hound::WavReader::new(reader)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(WavError::Unsupported(format!("{} channels, expected mono", spec.channels)));
    }
    let frames = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            r.into_samples::<i16>().map(|s| s.map(dequantize_i16)).collect::<Result<Vec<_>, _>>()?
        }
        (hound::SampleFormat::Float, 32) => r.into_samples::<f32>().collect::<Result<Vec<_>, _>>()?,
        (fmt, bits) => {
            return Err(WavError::Unsupported(format!("{bits}-bit {fmt:?}")));
        }
    };
    Ok(AudioBlock::new(spec.sample_rate, frames))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBlock, WavError> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    read_wav_from(file)
}
