//! Timestamped position paths: CSV parsing and serialization, and linear
//! resampling onto a uniform clock.
//!
//! CSV layout: a `t,x,y,z` header, one sample per row, `#` comment lines and
//! blank lines ignored. Times must strictly increase.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{DisplacementVector, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("missing `t,x,y,z` header")]
    MissingHeader,
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: time {t} does not increase (previous {prev})")]
    NonMonotone { line: usize, t: f64, prev: f64 },
    #[error("trajectory is empty")]
    Empty,
    #[error("2D trajectory has z = {z} at t = {t}")]
    NonPlanar { t: f64, z: f32 },
    #[error("time {t} does not increase (previous {prev})")]
    NonMonotoneSample { t: f64, prev: f64 },
    #[error("non-finite sample at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub d: DisplacementVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    samples: Vec<TrajectorySample>,
    mode: Mode,
}

impl Trajectory {
    pub fn new(samples: Vec<TrajectorySample>, mode: Mode) -> Result<Self, TrajectoryError> {
        if samples.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        for w in samples.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(TrajectoryError::NonMonotoneSample { t: w[1].t, prev: w[0].t });
            }
        }
        for s in &samples {
            if !s.t.is_finite() || !s.d.is_finite() {
                return Err(TrajectoryError::NonFinite { t: s.t });
            }
            if mode == Mode::TwoD && s.d.z != 0.0 {
                return Err(TrajectoryError::NonPlanar { t: s.t, z: s.d.z });
            }
        }
        Ok(Trajectory { samples, mode })
    }

    pub fn from_points(points: &[(f64, DisplacementVector)], mode: Mode) -> Result<Self, TrajectoryError> {
        Self::new(points.iter().map(|&(t, d)| TrajectorySample { t, d }).collect(), mode)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn with_mode(self, mode: Mode) -> Result<Self, TrajectoryError> {
        Self::new(self.samples, mode)
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    /// Total Euclidean path length.
    pub fn path_length(&self) -> f64 {
        self.samples.windows(2).map(|w| w[1].d.sub(&w[0].d).norm()).sum()
    }

    /// Position at time `t`, linearly interpolated and held at both ends.
    pub fn position_at(&self, t: f64) -> DisplacementVector {
        interpolate(&self.samples, t)
    }

    /// `ceil(duration * rate) + 1` points on a uniform clock starting at the
    /// first sample time.
    pub fn resample(&self, rate: f64) -> Vec<DisplacementVector> {
        assert!(rate > 0.0, "resample rate must be positive");
        let n = (self.duration() * rate).ceil() as usize + 1;
        let t0 = self.start_time();
        (0..n).map(|i| self.position_at(t0 + i as f64 / rate)).collect()
    }

    /// Renders the trajectory back to CSV. Floats use Rust's shortest
    /// round-trip formatting, so parsing the result is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 32 + 8);
        out.push_str("t,x,y,z\n");
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.t, s.d.x, s.d.y, s.d.z);
        }
        out
    }
}

/// Linear interpolation over sorted samples; held constant outside them.
pub fn interpolate(samples: &[TrajectorySample], t: f64) -> DisplacementVector {
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if t <= first.t {
        return first.d;
    }
    if t >= last.t {
        return last.d;
    }
    // First index with sample time > t; the segment starts one before it.
    let hi = samples.partition_point(|s| s.t <= t);
    let a = samples[hi - 1];
    let b = samples[hi];
    let f = (t - a.t) / (b.t - a.t);
    let lerp = |u: f32, v: f32| ((1.0 - f) * u as f64 + f * v as f64) as f32;
    DisplacementVector { x: lerp(a.d.x, b.d.x), y: lerp(a.d.y, b.d.y), z: lerp(a.d.z, b.d.z) }
}

/// Parses trajectory CSV. Coordinates outside `[-1, 1]` are kept; the
/// mapping clamps them.
pub fn parse_trajectory(text: &str) -> Result<Trajectory, TrajectoryError> {
    let mut header_seen = false;
    let mut samples: Vec<TrajectorySample> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols != ["t", "x", "y", "z"] {
                return Err(TrajectoryError::MissingHeader);
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(TrajectoryError::Malformed {
                line: line_no,
                msg: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let bad = |c: &str| TrajectoryError::Malformed { line: line_no, msg: format!("not a number: `{c}`") };
        let t: f64 = cols[0].parse().map_err(|_| bad(cols[0]))?;
        let mut xyz = [0f32; 3];
        for (slot, c) in xyz.iter_mut().zip(&cols[1..]) {
            *slot = c.parse().map_err(|_| bad(c))?;
        }
        let d = DisplacementVector { x: xyz[0], y: xyz[1], z: xyz[2] };
        if !t.is_finite() || !d.is_finite() {
            return Err(TrajectoryError::Malformed { line: line_no, msg: "non-finite value".into() });
        }
        if let Some(prev) = samples.last() {
            if !(t > prev.t) {
                return Err(TrajectoryError::NonMonotone { line: line_no, t, prev: prev.t });
            }
        }
        samples.push(TrajectorySample { t, d });
    }
    if !header_seen {
        return Err(TrajectoryError::MissingHeader);
    }
    Trajectory::new(samples, Mode::ThreeD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::{map_position, MappingConfig};
    use proptest::prelude::*;

    #[test]
    fn parses_minimal() {
        let tr = parse_trajectory("t,x,y,z\n0,0,0,0\n1,0.5,0,0").unwrap();
        assert_eq!(tr.samples().len(), 2);
        assert_eq!(tr.samples()[1].d.x, 0.5);
    }

    #[test]
    fn comments_and_blank_lines() {
        let tr = parse_trajectory("# demo\n\nt,x,y,z\n# mid\n0,1,2,3\n").unwrap();
        assert_eq!(tr.samples().len(), 1);
        assert_eq!(tr.samples()[0].d.z, 3.0);
    }

    #[test]
    fn errors_name_lines() {
        assert_eq!(parse_trajectory("0,0,0,0\n"), Err(TrajectoryError::MissingHeader));
        assert_eq!(parse_trajectory(""), Err(TrajectoryError::MissingHeader));
        let e = parse_trajectory("t,x,y,z\n0,0,0,0\n1,0,0,0\n0.5,0,0,0\n").unwrap_err();
        assert!(matches!(e, TrajectoryError::NonMonotone { line: 4, .. }));
        assert!(e.to_string().contains("line 4"));
        let e = parse_trajectory("t,x,y,z\n0,0,zero,0\n").unwrap_err();
        assert!(matches!(e, TrajectoryError::Malformed { line: 2, .. }));
        let e = parse_trajectory("t,x,y,z\n0,0,0\n").unwrap_err();
        assert!(matches!(e, TrajectoryError::Malformed { line: 2, .. }));
        assert_eq!(parse_trajectory("t,x,y,z\n"), Err(TrajectoryError::Empty));
    }

    #[test]
    fn planar_mode_rejects_z() {
        let tr = parse_trajectory("t,x,y,z\n0,0,0,0.1\n").unwrap();
        assert!(tr.with_mode(Mode::TwoD).is_err());
    }

    #[test]
    fn resample_two_points() {
        let tr = parse_trajectory("t,x,y,z\n0,0,0,0\n1,1,-1,0.5\n").unwrap();
        let r = tr.resample(4.0);
        assert_eq!(r.len(), 5);
        assert_eq!(r[2], DisplacementVector { x: 0.5, y: -0.5, z: 0.25 });
        assert_eq!(r[0], tr.samples()[0].d);
        assert_eq!(r[4], tr.samples()[1].d);
    }

    #[test]
    fn resample_single_sample() {
        let tr = parse_trajectory("t,x,y,z\n2,0.3,0.2,0.1\n").unwrap();
        let r = tr.resample(100.0);
        assert_eq!(r.len(), 1);
        let tr =
            Trajectory::from_points(&[(0.0, DisplacementVector { x: 0.3, y: 0.0, z: 0.0 })], Mode::ThreeD).unwrap();
        assert!(tr.resample(10.0).iter().all(|d| d.x == 0.3));
    }

    #[test]
    fn ten_thousand_rows_round_trip() {
        let mut text = String::from("t,x,y,z\n");
        for i in 0..10_000 {
            let t = i as f64 * 0.013 + 0.1;
            let x = ((i as f64) * 0.731).sin() as f32 * 1.2;
            let y = ((i as f64) * 0.291).cos() as f32 / 3.0;
            let z = (i as f32 * 1e-4) - 0.5;
            text.push_str(&format!("{t},{x},{y},{z}\n"));
        }
        let tr = parse_trajectory(&text).unwrap();
        assert_eq!(tr.samples().len(), 10_000);
        let again = parse_trajectory(&tr.to_csv()).unwrap();
        assert_eq!(again, tr);
        assert_eq!(again.to_csv(), tr.to_csv());
    }

    /// Linear x-ramp: trapezoidal integral of the mapped chroma velocity at a
    /// 100 Hz control rate against the closed-form phase.
    #[test]
    fn control_rate_chroma_phase_matches_analytic() {
        let cfg = MappingConfig::default();
        let (x0, x1, dur) = (-0.8f64, 0.6f64, 3.7f64);
        let tr = Trajectory::from_points(
            &[
                (0.0, DisplacementVector { x: x0 as f32, y: 0.0, z: 0.0 }),
                (dur, DisplacementVector { x: x1 as f32, y: 0.0, z: 0.0 }),
            ],
            Mode::ThreeD,
        )
        .unwrap();
        let rate = 100.0;
        let pts = tr.resample(rate);
        let v: Vec<f64> = pts.iter().map(|d| map_position(d, &cfg).unwrap().chroma_velocity).collect();
        let steps = (dur * rate).floor() as usize;
        let mut phase = 0.0;
        for i in 0..steps {
            phase += 0.5 * (v[i] + v[i + 1]) / rate;
        }
        // Remaining fraction of a control period up to `dur`.
        let rem = dur - steps as f64 / rate;
        let v_end = -cfg.v_max * x1 as f32 as f64;
        phase += 0.5 * (v[steps] + v_end) * rem;
        let analytic = -cfg.v_max * (x0 as f32 as f64 + x1 as f32 as f64) / 2.0 * dur;
        assert!((phase - analytic).abs() < 1e-3, "{phase} vs {analytic}");
    }

    proptest! {
        #[test]
        fn resampling_exact_on_sample_times(pts in prop::collection::vec((-2.0f32..2.0, -2.0f32..2.0, -2.0f32..2.0), 1..20)) {
            let samples: Vec<_> = pts.iter().enumerate()
                .map(|(i, &(x, y, z))| TrajectorySample { t: i as f64 * 0.25, d: DisplacementVector { x, y, z } })
                .collect();
            let tr = Trajectory::new(samples.clone(), Mode::ThreeD).unwrap();
            let r = tr.resample(4.0);
            for (i, s) in samples.iter().enumerate() {
                prop_assert_eq!(r[i], s.d);
            }
        }

        #[test]
        fn csv_round_trip(pts in prop::collection::vec((0.001f64..10.0, any::<f32>(), any::<f32>(), any::<f32>()), 1..50)) {
            let mut t = 0.0;
            let mut samples = Vec::new();
            for (dt, x, y, z) in pts {
                if !(x.is_finite() && y.is_finite() && z.is_finite()) { continue; }
                t += dt;
                samples.push(TrajectorySample { t, d: DisplacementVector { x, y, z } });
            }
            prop_assume!(!samples.is_empty());
            let tr = Trajectory::new(samples, Mode::ThreeD).unwrap();
            prop_assert_eq!(parse_trajectory(&tr.to_csv()).unwrap(), tr);
        }
    }
}
