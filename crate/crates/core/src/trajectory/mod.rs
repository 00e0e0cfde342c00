//! Trajectory segments: parsing, gap repair, smoothing, and projection onto a
//! longitudinal axis.

mod diff;
mod gaps;
mod geo;
mod io;
mod smooth;

use serde::{Deserialize, Serialize};

pub use diff::{cumulative_integrate, differentiate};
pub use gaps::{interpolate_gaps, split_at_gaps, DEFAULT_MAX_GAP_S};
pub use geo::{haversine, project_to_path, PathChain};
pub use io::{
    format_time, parse_segment, parse_time, read_segment_dir, read_segment_file, write_segment,
    Field, Schema, SegmentMeta,
};
pub use smooth::{moving_average, smooth_segment, window_samples_for, DEFAULT_WINDOW_SAMPLES};

use crate::behavior::{AnnotationRecord, BehaviorLabel};
use crate::error::{Error, Result};
use crate::units::DT_NOMINAL;

/// Position and speed of one vehicle at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fix {
    /// Degrees.
    pub lat: f64,
    /// Degrees.
    pub lon: f64,
    /// m/s.
    pub speed: f64,
}

/// Supplementary GNSS quality columns. All optional.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracy {
    pub horizontal_accuracy: Option<f64>,
    pub vertical_accuracy: Option<f64>,
    pub pdop: Option<f64>,
    pub hdop: Option<f64>,
    pub vdop: Option<f64>,
    pub elevation: Option<f64>,
    pub bearing: Option<f64>,
    pub instrument_height: Option<f64>,
}

impl Accuracy {
    pub fn is_empty(&self) -> bool {
        *self == Accuracy::default()
    }
}

/// One timestamped sample. Raw and smoothed values are kept apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Absolute time, seconds since the Unix epoch.
    pub t: f64,
    pub raw: Fix,
    pub smoothed: Option<Fix>,
    pub lead: Option<Fix>,
    pub lead_smoothed: Option<Fix>,
    pub accuracy: Accuracy,
}

impl TrajectoryPoint {
    pub fn new(t: f64, lat: f64, lon: f64, speed: f64) -> Self {
        TrajectoryPoint {
            t,
            raw: Fix { lat, lon, speed },
            smoothed: None,
            lead: None,
            lead_smoothed: None,
            accuracy: Accuracy::default(),
        }
    }

    pub fn with_lead(mut self, lat: f64, lon: f64, speed: f64) -> Self {
        self.lead = Some(Fix { lat, lon, speed });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySegment {
    pub id: String,
    pub points: Vec<TrajectoryPoint>,
    pub behavior: BehaviorLabel,
    /// Configured desired speed (m/s); drives the fixed `v_max` during calibration.
    pub desired_speed: Option<f64>,
    pub dt_nominal: f64,
    pub annotation: Option<AnnotationRecord>,
    /// Zone offset of the source timestamps, reused when writing.
    pub utc_offset_s: i32,
}

impl TrajectorySegment {
    pub fn new(
        id: impl Into<String>,
        points: Vec<TrajectoryPoint>,
        behavior: BehaviorLabel,
        desired_speed: f64,
    ) -> Self {
        TrajectorySegment {
            id: id.into(),
            points,
            behavior,
            desired_speed: Some(desired_speed),
            dt_nominal: DT_NOMINAL,
            annotation: None,
            utc_offset_s: 0,
        }
    }

    pub fn gap_level(&self) -> Option<u8> {
        self.behavior.gap_level()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn time_span(&self) -> (f64, f64) {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => (a.t, b.t),
            _ => (f64::NAN, f64::NAN),
        }
    }

    pub fn duration(&self) -> f64 {
        let (a, b) = self.time_span();
        if self.points.is_empty() {
            0.0
        } else {
            b - a
        }
    }

    pub fn has_smoothed(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.smoothed.is_some())
    }

    pub fn has_lead(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.lead.is_some())
    }

    /// Median spacing between consecutive timestamps.
    pub fn median_interval(&self) -> Option<f64> {
        let mut d: Vec<f64> = self.points.windows(2).map(|w| w[1].t - w[0].t).collect();
        if d.is_empty() {
            return None;
        }
        d.sort_by(f64::total_cmp);
        Some(d[d.len() / 2])
    }

    /// Structural invariants: ≥ 2 points, strictly increasing time, value ranges.
    pub fn check(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::invalid(format!(
                "segment `{}` has {} point(s), need at least 2",
                self.id,
                self.points.len()
            )));
        }
        if !(self.dt_nominal > 0.0) {
            return Err(Error::invalid("dt_nominal must be positive"));
        }
        self.behavior.validated()?;
        for (i, p) in self.points.iter().enumerate() {
            check_fix(&p.raw).map_err(|m| Error::data(format!("sample {i}: {m}")))?;
            for f in [p.smoothed, p.lead, p.lead_smoothed].iter().flatten() {
                check_fix(f).map_err(|m| Error::data(format!("sample {i}: {m}")))?;
            }
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::NonMonotoneTime { line: i + 1, prev: w[0].t, t: w[1].t });
            }
        }
        Ok(())
    }
}

fn check_fix(f: &Fix) -> std::result::Result<(), String> {
    if !(-90.0..=90.0).contains(&f.lat) {
        return Err(format!("latitude {} out of range", f.lat));
    }
    if !(-180.0..=180.0).contains(&f.lon) {
        return Err(format!("longitude {} out of range", f.lon));
    }
    if !(f.speed >= 0.0) {
        return Err(format!("speed {} is negative", f.speed));
    }
    Ok(())
}

/// Which columns a projection was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Raw,
    Smoothed,
}

/// A leader trajectory on the follower's longitudinal axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderTrack {
    pub t: Vec<f64>,
    pub position: Vec<f64>,
    pub speed: Vec<f64>,
}

impl LeaderTrack {
    /// Position and speed at `t`, linearly interpolated. `None` outside the
    /// covered span.
    pub fn sample(&self, t: f64) -> Option<(f64, f64)> {
        let n = self.t.len();
        if n == 0 {
            return None;
        }
        let tol = 1e-6;
        if t < self.t[0] - tol || t > self.t[n - 1] + tol {
            return None;
        }
        let k = self.t.partition_point(|&x| x <= t);
        if k == 0 {
            return Some((self.position[0], self.speed[0]));
        }
        if k >= n {
            return Some((self.position[n - 1], self.speed[n - 1]));
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let w = (t - t0) / (t1 - t0);
        let lerp = |a: f64, b: f64| a + (b - a) * w;
        Some((
            lerp(self.position[k - 1], self.position[k]),
            lerp(self.speed[k - 1], self.speed[k]),
        ))
    }

    pub fn end_time(&self) -> f64 {
        self.t.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Kinematic series along the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalSeries {
    pub t: Vec<f64>,
    /// Metres from the first sample.
    pub position: Vec<f64>,
    pub speed: Vec<f64>,
    pub accel: Vec<f64>,
    pub jerk: Vec<f64>,
    pub leader: Option<LeaderTrack>,
    /// Leader position minus follower position, when a leader exists.
    pub spacing: Option<Vec<f64>>,
    pub source: Source,
}

impl LongitudinalSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Builds accel and jerk from `speed` by differentiation.
    pub fn from_kinematics(
        t: Vec<f64>,
        position: Vec<f64>,
        speed: Vec<f64>,
        dt: f64,
        source: Source,
    ) -> Self {
        let accel = derivative_any_len(&speed, dt);
        let jerk = derivative_any_len(&accel, dt);
        LongitudinalSeries { t, position, speed, accel, jerk, leader: None, spacing: None, source }
    }

    pub fn with_leader(mut self, leader: LeaderTrack) -> Self {
        let spacing = leader.position.iter().zip(&self.position).map(|(l, f)| l - f).collect();
        self.spacing = Some(spacing);
        self.leader = Some(leader);
        self
    }

    /// Sub-series over indices `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let r = range;
        LongitudinalSeries {
            t: self.t[r.clone()].to_vec(),
            position: self.position[r.clone()].to_vec(),
            speed: self.speed[r.clone()].to_vec(),
            accel: self.accel[r.clone()].to_vec(),
            jerk: self.jerk[r.clone()].to_vec(),
            leader: self.leader.as_ref().map(|l| LeaderTrack {
                t: l.t[r.clone()].to_vec(),
                position: l.position[r.clone()].to_vec(),
                speed: l.speed[r.clone()].to_vec(),
            }),
            spacing: self.spacing.as_ref().map(|s| s[r.clone()].to_vec()),
            source: self.source,
        }
    }

    /// Path length covered by the series.
    pub fn distance(&self) -> f64 {
        match (self.position.first(), self.position.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// [`differentiate`] for any length: two samples give a constant slope, one
/// sample gives zero.
pub(crate) fn derivative_any_len(v: &[f64], dt: f64) -> Vec<f64> {
    match v.len() {
        0 => Vec::new(),
        1 => vec![0.0],
        2 => vec![(v[1] - v[0]) / dt; 2],
        _ => differentiate(v, dt).expect("length checked"),
    }
}
