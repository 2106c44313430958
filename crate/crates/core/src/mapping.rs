//! Translation of a target-relative displacement into a perceptual parameter
//! frame, and the exact inverse of that translation.
//!
//! Axis assignment:
//!
//! * `x` drives the direction and speed of the chroma glide. `x > 0` falls,
//!   `x < 0` rises, `x = 0` is steady.
//! * `y > 0` drives roughness depth, `y < 0` drives the beat rate.
//! * `z > 0` drives brightness, `z < 0` drives fullness.
//!
//! Every mapping constant lives in [`MappingConfig`].
//!
//! Positions are carried as `f32` and parameters as `f64`. The forward map
//! multiplies an `f32` by an `f64` constant, which is exact or within one
//! `f64` rounding, so dividing back and narrowing to `f32` recovers the
//! original coordinate bit for bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("displacement has a non-finite component: ({x}, {y}, {z})")]
    NonFinite { x: f32, y: f32, z: f32 },
    #[error("invalid mapping config: {0}")]
    InvalidConfig(String),
    #[error("inconsistent parameter frame: {0}")]
    InconsistentParams(String),
}

/// Whether navigation happens in the plane (`z` locked at zero) or in space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[serde(rename = "2d")]
    TwoD,
    #[default]
    #[serde(rename = "3d")]
    ThreeD,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "2d" => Ok(Mode::TwoD),
            "3d" => Ok(Mode::ThreeD),
            other => Err(format!("unknown mode `{other}` (expected 2d or 3d)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::TwoD => "2d",
            Mode::ThreeD => "3d",
        })
    }
}

/// Operator position relative to the target, in fractions of the workspace
/// half-extent. `(0, 0, 0)` is exact coincidence with the target.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementVector {
    pub x: f32,
    pub y: f32,
    pub z: f32,
}

impl DisplacementVector {
    pub const ORIGIN: DisplacementVector = DisplacementVector { x: 0.0, y: 0.0, z: 0.0 };

    /// Checked constructor; rejects NaN and infinities.
    pub fn new(x: f32, y: f32, z: f32) -> Result<Self, MappingError> {
        let d = DisplacementVector { x, y, z };
        d.ensure_finite()?;
        Ok(d)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn ensure_finite(&self) -> Result<(), MappingError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(MappingError::NonFinite { x: self.x, y: self.y, z: self.z })
        }
    }

    pub fn norm(&self) -> f64 {
        let (x, y, z) = (self.x as f64, self.y as f64, self.z as f64);
        (x * x + y * y + z * z).sqrt()
    }

    /// Component-wise clamp into the unit cube.
    pub fn clamped(&self) -> DisplacementVector {
        DisplacementVector { x: self.x.clamp(-1.0, 1.0), y: self.y.clamp(-1.0, 1.0), z: self.z.clamp(-1.0, 1.0) }
    }

    pub fn sub(&self, other: &DisplacementVector) -> DisplacementVector {
        DisplacementVector { x: self.x - other.x, y: self.y - other.y, z: self.z - other.z }
    }

    pub fn max_abs_diff(&self, other: &DisplacementVector) -> f32 {
        (self.x - other.x).abs().max((self.y - other.y).abs()).max((self.z - other.z).abs())
    }
}

/// Perceptual control frame consumed by the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SonificationParams {
    /// Octaves per second; positive rises.
    pub chroma_velocity: f64,
    /// Hz, zero unless the `y < 0` half is active.
    pub beat_rate: f64,
    pub beat_depth: f64,
    pub roughness_depth: f64,
    pub brightness: f64,
    pub fullness: f64,
    /// Linear gain of the target-zone noise bed.
    pub noise_gain: f64,
}

impl SonificationParams {
    /// The steady, smooth, dull-but-full sound heard at the target.
    pub const NEUTRAL: SonificationParams = SonificationParams {
        chroma_velocity: 0.0,
        beat_rate: 0.0,
        beat_depth: 0.0,
        roughness_depth: 0.0,
        brightness: 0.0,
        fullness: 0.0,
        noise_gain: 0.0,
    };

    pub fn validate(&self) -> Result<(), MappingError> {
        let fields = [
            ("chroma_velocity", self.chroma_velocity),
            ("beat_rate", self.beat_rate),
            ("beat_depth", self.beat_depth),
            ("roughness_depth", self.roughness_depth),
            ("brightness", self.brightness),
            ("fullness", self.fullness),
            ("noise_gain", self.noise_gain),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(MappingError::InconsistentParams(format!("{name} is not finite")));
            }
        }
        if self.beat_rate < 0.0 {
            return Err(MappingError::InconsistentParams("beat_rate < 0".into()));
        }
        for (name, v) in [
            ("beat_depth", self.beat_depth),
            ("roughness_depth", self.roughness_depth),
            ("brightness", self.brightness),
            ("fullness", self.fullness),
            ("noise_gain", self.noise_gain),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MappingError::InconsistentParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.beat_rate > 0.0 && self.roughness_depth > 0.0 {
            return Err(MappingError::InconsistentParams("beats and roughness are both active".into()));
        }
        if self.brightness > 0.0 && self.fullness > 0.0 {
            return Err(MappingError::InconsistentParams("brightness and fullness are both active".into()));
        }
        Ok(())
    }
}

/// Constants of the displacement-to-sound mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    /// Chroma speed at `|x| = 1`, octaves per second.
    pub v_max: f64,
    /// Beat rate at `y = -1`, Hz.
    pub beat_rate_max: f64,
    /// Width of the `y < 0` region over which beat depth ramps to full.
    pub beat_depth_ramp: f64,
    /// Fixed rate of the roughness modulator, Hz.
    pub roughness_rate: f64,
    pub roughness_depth_max: f64,
    /// Spectral-envelope shift at `z = +1`, octaves.
    pub brightness_octave_shift_max: f64,
    /// Additional envelope half-width at `z = -1`, octaves.
    pub fullness_bandwidth_max: f64,
    pub target_radius: f64,
    /// Excursion needed to re-arm a plane-crossing cue.
    pub hysteresis: f64,
    pub noise_gain_in_zone: f64,
    /// Exponent applied to distance before it drives a speed (chroma
    /// velocity, beat rate). `1.0` is linear.
    pub speed_exponent: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            v_max: 1.5,
            beat_rate_max: 8.0,
            beat_depth_ramp: 0.05,
            roughness_rate: 70.0,
            roughness_depth_max: 0.9,
            brightness_octave_shift_max: 2.0,
            fullness_bandwidth_max: 2.5,
            target_radius: 0.05,
            hysteresis: 0.02,
            noise_gain_in_zone: 0.03,
            speed_exponent: 1.0,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), MappingError> {
        let positive = [
            ("v_max", self.v_max),
            ("beat_rate_max", self.beat_rate_max),
            ("beat_depth_ramp", self.beat_depth_ramp),
            ("roughness_rate", self.roughness_rate),
            ("roughness_depth_max", self.roughness_depth_max),
            ("brightness_octave_shift_max", self.brightness_octave_shift_max),
            ("fullness_bandwidth_max", self.fullness_bandwidth_max),
            ("target_radius", self.target_radius),
            ("hysteresis", self.hysteresis),
            ("noise_gain_in_zone", self.noise_gain_in_zone),
            ("speed_exponent", self.speed_exponent),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(MappingError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.hysteresis >= self.target_radius {
            return Err(MappingError::InvalidConfig(format!(
                "hysteresis ({}) must be smaller than target_radius ({})",
                self.hysteresis, self.target_radius
            )));
        }
        for (name, v) in
            [("roughness_depth_max", self.roughness_depth_max), ("noise_gain_in_zone", self.noise_gain_in_zone)]
        {
            if v > 1.0 {
                return Err(MappingError::InvalidConfig(format!("{name} must be at most 1, got {v}")));
            }
        }
        Ok(())
    }

    fn shape(&self, magnitude: f64) -> f64 {
        if self.speed_exponent == 1.0 {
            magnitude
        } else {
            magnitude.powf(self.speed_exponent)
        }
    }

    fn unshape(&self, value: f64) -> f64 {
        if self.speed_exponent == 1.0 {
            value
        } else {
            value.powf(self.speed_exponent.recip())
        }
    }
}

/// Maps a displacement onto its parameter frame. Coordinates are clamped to
/// `[-1, 1]` so out-of-workspace input saturates at maximum urgency.
pub fn map_position(d: &DisplacementVector, cfg: &MappingConfig) -> Result<SonificationParams, MappingError> {
    d.ensure_finite()?;
    let c = d.clamped();
    let (x, y, z) = (c.x as f64, c.y as f64, c.z as f64);

    let mut p = SonificationParams {
        chroma_velocity: -cfg.v_max * x.signum() * cfg.shape(x.abs()),
        ..SonificationParams::NEUTRAL
    };
    if x == 0.0 {
        p.chroma_velocity = 0.0;
    }

    if y > 0.0 {
        p.roughness_depth = cfg.roughness_depth_max * y;
    } else if y < 0.0 {
        p.beat_rate = cfg.beat_rate_max * cfg.shape(-y);
        p.beat_depth = (-y / cfg.beat_depth_ramp).min(1.0);
    }

    if z > 0.0 {
        p.brightness = z;
    } else if z < 0.0 {
        p.fullness = -z;
    }

    if in_target_zone(d, cfg) {
        p.noise_gain = cfg.noise_gain_in_zone;
    }
    Ok(p)
}

/// Recovers the displacement that produced `p`. Exact inverse of
/// [`map_position`] on the unit cube; `noise_gain` is ignored.
pub fn invert_params(p: &SonificationParams, cfg: &MappingConfig) -> Result<DisplacementVector, MappingError> {
    p.validate()?;

    let vx = p.chroma_velocity / cfg.v_max;
    let x = -vx.signum() * cfg.unshape(vx.abs());

    let y = if p.beat_rate > 0.0 {
        -cfg.unshape(p.beat_rate / cfg.beat_rate_max)
    } else if p.roughness_depth > 0.0 {
        p.roughness_depth / cfg.roughness_depth_max
    } else {
        0.0
    };

    let z = if p.brightness > 0.0 { p.brightness } else { -p.fullness };

    let (x, y, z) = (x as f32, y as f32, z as f32);
    Ok(DisplacementVector { x: if x == 0.0 { 0.0 } else { x }, y, z: if z == 0.0 { 0.0 } else { z } })
}

/// Whether `d` lies in the closed ball of radius `target_radius`.
///
/// The radius is rounded to position precision (`f32`) first, so a point
/// written as exactly the radius, e.g. `(0.05, 0, 0)`, is inside.
pub fn in_target_zone(d: &DisplacementVector, cfg: &MappingConfig) -> bool {
    d.norm() <= cfg.target_radius as f32 as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(x: f32, y: f32, z: f32) -> DisplacementVector {
        DisplacementVector::new(x, y, z).unwrap()
    }

    #[test]
    fn origin_is_neutral_with_zone_noise() {
        let p = map_position(&DisplacementVector::ORIGIN, &MappingConfig::default()).unwrap();
        assert_eq!(p, SonificationParams { noise_gain: 0.03, ..SonificationParams::NEUTRAL });
    }

    #[test]
    fn positive_x_falls() {
        let p = map_position(&dv(0.5, 0.0, 0.0), &MappingConfig::default()).unwrap();
        assert_eq!(p.chroma_velocity, -0.75);
        assert_eq!(p.beat_rate, 0.0);
        assert_eq!(p.roughness_depth, 0.0);
        assert_eq!(p.brightness, 0.0);
        assert_eq!(p.fullness, 0.0);
        assert_eq!(p.noise_gain, 0.0);
    }

    #[test]
    fn negative_y_beats() {
        let p = map_position(&dv(0.0, -0.5, 0.0), &MappingConfig::default()).unwrap();
        assert_eq!(p.beat_rate, 4.0);
        assert_eq!(p.beat_depth, 1.0);
        assert_eq!(p.roughness_depth, 0.0);
    }

    #[test]
    fn negative_z_full() {
        let p = map_position(&dv(0.0, 0.0, -1.0), &MappingConfig::default()).unwrap();
        assert_eq!(p.fullness, 1.0);
        assert_eq!(p.brightness, 0.0);
    }

    #[test]
    fn beat_depth_ramps_inside_band() {
        let p = map_position(&dv(0.0, -0.025, 0.0), &MappingConfig::default()).unwrap();
        assert!((p.beat_depth - 0.5).abs() < 1e-6);
    }

    #[test]
    fn out_of_range_is_clamped() {
        let cfg = MappingConfig::default();
        let a = map_position(&dv(3.0, -7.0, 2.0), &cfg).unwrap();
        let b = map_position(&dv(1.0, -1.0, 1.0), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_rejected() {
        let d = DisplacementVector { x: f32::NAN, y: 0.0, z: 0.0 };
        assert!(matches!(map_position(&d, &MappingConfig::default()), Err(MappingError::NonFinite { .. })));
        assert!(DisplacementVector::new(0.0, f32::INFINITY, 0.0).is_err());
    }

    #[test]
    fn invert_neutral_and_linear() {
        let cfg = MappingConfig::default();
        assert_eq!(invert_params(&SonificationParams::NEUTRAL, &cfg).unwrap(), DisplacementVector::ORIGIN);
        let p = SonificationParams { chroma_velocity: -0.75, ..SonificationParams::NEUTRAL };
        assert_eq!(invert_params(&p, &cfg).unwrap().x, 0.5);
    }

    #[test]
    fn invert_rejects_conflicting_halves() {
        let cfg = MappingConfig::default();
        let p = SonificationParams { beat_rate: 2.0, roughness_depth: 0.1, ..SonificationParams::NEUTRAL };
        assert!(matches!(invert_params(&p, &cfg), Err(MappingError::InconsistentParams(_))));
        let p = SonificationParams { brightness: 0.2, fullness: 0.1, ..SonificationParams::NEUTRAL };
        assert!(invert_params(&p, &cfg).is_err());
    }

    #[test]
    fn zone_boundary() {
        let cfg = MappingConfig::default();
        assert!(in_target_zone(&DisplacementVector::ORIGIN, &cfg));
        assert!(in_target_zone(&dv(0.05, 0.0, 0.0), &cfg));
        // sqrt(0.04^2 + 0.04^2) = 0.0566 > 0.05
        assert!(!in_target_zone(&dv(0.04, 0.04, 0.0), &cfg));
    }

    #[test]
    fn config_validation() {
        assert!(MappingConfig::default().validate().is_ok());
        let bad = MappingConfig { hysteresis: 0.06, ..MappingConfig::default() };
        assert!(bad.validate().is_err());
        let bad = MappingConfig { v_max: 0.0, ..MappingConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn nonlinear_exponent_round_trips_closely() {
        let cfg = MappingConfig { speed_exponent: 2.0, ..MappingConfig::default() };
        let d = dv(0.3, -0.6, 0.1);
        let p = map_position(&d, &cfg).unwrap();
        assert!((p.chroma_velocity + 1.5 * 0.09).abs() < 1e-6);
        let back = invert_params(&p, &cfg).unwrap();
        assert!(back.max_abs_diff(&d) < 1e-6);
    }
}
