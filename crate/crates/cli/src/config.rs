//! `key = value` configuration: one setting per line, `#` comments. Every
//! key maps to one field of the mapping, synthesizer, session or operator
//! configuration; unknown keys are errors.

use std::path::{Path, PathBuf};

use sonic_guide::{MappingConfig, Mode, SynthConfig};
use sonic_guide_service::{default_addr, OperatorConfig, SessionConfig};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: bad value `{value}` for `{key}`: {msg}")]
    BadValue { origin: String, key: String, value: String, msg: String },
    #[error("{origin}: expected `key = value`")]
    Syntax { origin: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub mapping: MappingConfig,
    pub synth: SynthConfig,
    pub mode: Mode,
    pub dwell_time: f64,
    pub start_distance: f64,
    pub trial_timeout: f64,
    pub addr: String,
    pub log_dir: Option<PathBuf>,
    pub analysis_window: f64,
    pub settle: f64,
    pub step_gain: f64,
    pub max_step: f64,
    pub max_steps: u32,
    pub agent_target_radius: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        let op = OperatorConfig::default();
        let s = SessionConfig::default();
        AppConfig {
            mapping: MappingConfig::default(),
            synth: SynthConfig::default(),
            mode: Mode::ThreeD,
            dwell_time: s.dwell_time,
            start_distance: s.start_distance,
            trial_timeout: s.trial_timeout,
            addr: default_addr(),
            log_dir: None,
            analysis_window: op.analysis_window,
            settle: op.settle,
            step_gain: op.step_gain,
            max_step: op.max_step,
            max_steps: op.max_steps,
            agent_target_radius: op.target_radius,
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("mode", "navigation mode, 2d or 3d"),
    ("v_max", "chroma velocity at |x| = 1, octaves/s"),
    ("beat_rate_max", "beat rate at y = -1, Hz"),
    ("beat_depth_ramp", "|y| over which beat depth reaches full"),
    ("roughness_rate", "roughness modulation rate, Hz"),
    ("roughness_depth_max", "roughness depth at y = +1"),
    ("brightness_octave_shift_max", "envelope shift at z = +1, octaves"),
    ("fullness_bandwidth_max", "extra envelope half-width at z = -1, octaves"),
    ("target_radius", "target-zone radius, normalized"),
    ("hysteresis", "plane-crossing re-arm excursion"),
    ("noise_gain_in_zone", "zone-noise level"),
    ("speed_exponent", "distance exponent for speed cues"),
    ("sample_rate", "output sample rate, Hz"),
    ("block_size", "frames per block"),
    ("partial_count", "Shepard partials"),
    ("base_frequency", "lowest partial at chroma phase 0, Hz"),
    ("envelope_center", "spectral envelope centre, Hz"),
    ("envelope_width", "spectral envelope half-width, octaves"),
    ("smoothing_time", "parameter smoothing time constant, s"),
    ("master_gain", "output gain"),
    ("noise_seed", "zone-noise generator seed"),
    ("dwell_time", "time in zone that counts as a hit, s"),
    ("start_distance", "trial start distance, normalized"),
    ("trial_timeout", "trial timeout, s"),
    ("addr", "service listen address"),
    ("log_dir", "directory for session logs"),
    ("analysis_window", "simulated operator: audio per step, s"),
    ("settle", "simulated operator: wait before listening, s"),
    ("step_gain", "simulated operator: fraction of decoded offset moved"),
    ("max_step", "simulated operator: step length cap"),
    ("max_steps", "simulated operator: step budget per trial"),
    ("agent_target_radius", "simulated operator: target-zone radius"),
];

impl AppConfig {
    /// Current value of `key` as text.
    pub fn get(&self, key: &str) -> Option<String> {
        let m = &self.mapping;
        let s = &self.synth;
        Some(match key {
            "mode" => self.mode.to_string(),
            "v_max" => m.v_max.to_string(),
            "beat_rate_max" => m.beat_rate_max.to_string(),
            "beat_depth_ramp" => m.beat_depth_ramp.to_string(),
            "roughness_rate" => m.roughness_rate.to_string(),
            "roughness_depth_max" => m.roughness_depth_max.to_string(),
            "brightness_octave_shift_max" => m.brightness_octave_shift_max.to_string(),
            "fullness_bandwidth_max" => m.fullness_bandwidth_max.to_string(),
            "target_radius" => m.target_radius.to_string(),
            "hysteresis" => m.hysteresis.to_string(),
            "noise_gain_in_zone" => m.noise_gain_in_zone.to_string(),
            "speed_exponent" => m.speed_exponent.to_string(),
            "sample_rate" => s.sample_rate.to_string(),
            "block_size" => s.block_size.to_string(),
            "partial_count" => s.partial_count.to_string(),
            "base_frequency" => s.base_frequency.to_string(),
            "envelope_center" => s.envelope_center.to_string(),
            "envelope_width" => s.envelope_width.to_string(),
            "smoothing_time" => s.smoothing_time.to_string(),
            "master_gain" => s.master_gain.to_string(),
            "noise_seed" => s.noise_seed.to_string(),
            "dwell_time" => self.dwell_time.to_string(),
            "start_distance" => self.start_distance.to_string(),
            "trial_timeout" => self.trial_timeout.to_string(),
            "addr" => self.addr.clone(),
            "log_dir" => self.log_dir.as_ref().map_or_else(|| "(none)".into(), |p| p.display().to_string()),
            "analysis_window" => self.analysis_window.to_string(),
            "settle" => self.settle.to_string(),
            "step_gain" => self.step_gain.to_string(),
            "max_step" => self.max_step.to_string(),
            "max_steps" => self.max_steps.to_string(),
            "agent_target_radius" => self.agent_target_radius.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::BadValue {
            origin: origin.to_string(),
            key: key.to_string(),
            value: value.to_string(),
            msg,
        };
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| e.to_string())
        }
        let m = &mut self.mapping;
        let s = &mut self.synth;
        match key {
            "mode" => self.mode = value.parse().map_err(bad)?,
            "v_max" => m.v_max = num(value).map_err(bad)?,
            "beat_rate_max" => m.beat_rate_max = num(value).map_err(bad)?,
            "beat_depth_ramp" => m.beat_depth_ramp = num(value).map_err(bad)?,
            "roughness_rate" => m.roughness_rate = num(value).map_err(bad)?,
            "roughness_depth_max" => m.roughness_depth_max = num(value).map_err(bad)?,
            "brightness_octave_shift_max" => m.brightness_octave_shift_max = num(value).map_err(bad)?,
            "fullness_bandwidth_max" => m.fullness_bandwidth_max = num(value).map_err(bad)?,
            "target_radius" => m.target_radius = num(value).map_err(bad)?,
            "hysteresis" => m.hysteresis = num(value).map_err(bad)?,
            "noise_gain_in_zone" => m.noise_gain_in_zone = num(value).map_err(bad)?,
            "speed_exponent" => m.speed_exponent = num(value).map_err(bad)?,
            "sample_rate" => s.sample_rate = num(value).map_err(bad)?,
            "block_size" => s.block_size = num(value).map_err(bad)?,
            "partial_count" => s.partial_count = num(value).map_err(bad)?,
            "base_frequency" => s.base_frequency = num(value).map_err(bad)?,
            "envelope_center" => s.envelope_center = num(value).map_err(bad)?,
            "envelope_width" => s.envelope_width = num(value).map_err(bad)?,
            "smoothing_time" => s.smoothing_time = num(value).map_err(bad)?,
            "master_gain" => s.master_gain = num(value).map_err(bad)?,
            "noise_seed" => s.noise_seed = num(value).map_err(bad)?,
            "dwell_time" => self.dwell_time = num(value).map_err(bad)?,
            "start_distance" => self.start_distance = num(value).map_err(bad)?,
            "trial_timeout" => self.trial_timeout = num(value).map_err(bad)?,
            "addr" => self.addr = value.to_string(),
            "log_dir" => self.log_dir = Some(PathBuf::from(value)),
            "analysis_window" => self.analysis_window = num(value).map_err(bad)?,
            "settle" => self.settle = num(value).map_err(bad)?,
            "step_gain" => self.step_gain = num(value).map_err(bad)?,
            "max_step" => self.max_step = num(value).map_err(bad)?,
            "max_steps" => self.max_steps = num(value).map_err(bad)?,
            "agent_target_radius" => self.agent_target_radius = num(value).map_err(bad)?,
            _ => return Err(ConfigError::UnknownKey { origin: origin.to_string(), key: key.to_string() }),
        }
        Ok(())
    }

    /// Applies a config file's settings on top of `self`.
    pub fn apply_text(&mut self, text: &str, name: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{name}:{}", i + 1);
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { origin: origin.clone() })?;
            self.set(k.trim(), v.trim(), &origin)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        self.apply_text(&text, &path.display().to_string()).map_err(|e| e.to_string())
    }

    /// Applies a `key=value` override given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let origin = format!("--set {kv}");
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError::Syntax { origin: origin.clone() })?;
        self.set(k.trim(), v.trim(), &origin)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mapping.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.synth.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let positive = [
            ("dwell_time", self.dwell_time),
            ("trial_timeout", self.trial_timeout),
            ("analysis_window", self.analysis_window),
            ("step_gain", self.step_gain),
            ("max_step", self.max_step),
            ("agent_target_radius", self.agent_target_radius),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(ConfigError::Invalid(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.start_distance >= 0.0 && self.start_distance.is_finite()) || !(self.settle >= 0.0) {
            return Err(ConfigError::Invalid("start_distance and settle must be non-negative".into()));
        }
        Ok(())
    }

    pub fn session(&self) -> SessionConfig {
        SessionConfig {
            synth: self.synth,
            mapping: self.mapping,
            mode: self.mode,
            dwell_time: self.dwell_time,
            start_distance: self.start_distance,
            trial_timeout: self.trial_timeout,
            ..SessionConfig::default()
        }
    }

    pub fn operator(&self, trials: usize, seed: u64) -> OperatorConfig {
        OperatorConfig {
            trials,
            seed,
            analysis_window: self.analysis_window,
            settle: self.settle,
            step_gain: self.step_gain,
            max_step: self.max_step,
            max_steps: self.max_steps,
            mode: self.mode,
            start_distance: self.start_distance,
            target_radius: self.agent_target_radius,
            synth: self.synth,
            mapping: self.mapping,
            ..OperatorConfig::default()
        }
    }
}

/// Help text listing every key with its default.
pub fn keys_help() -> String {
    let d = AppConfig::default();
    let mut out = String::from("Configuration keys (--config FILE with `key = value` lines, or --set key=value):\n");
    for (k, desc) in KEYS {
        out.push_str(&format!("  {k:<28} {desc} [default: {}]\n", d.get(k).unwrap_or_default()));
    }
    out.push_str("Precedence: command-line flags > --set > config file > defaults.");
    out
}
