//! Behavior taxonomy, event annotations, reaction delays and the
//! car-following threshold decision.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{self, TrajectorySegment};

/// Speed above which the vehicle counts as moving (m/s).
pub const DEFAULT_MOTION_THRESHOLD: f64 = 0.3;

/// Lead-vehicle distance below which the system follows instead of stopping (m).
pub const DEFAULT_FOLLOW_THRESHOLD_M: f64 = 90.0;

/// Observed behavior of the equipped vehicle at a traffic control device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorLabel {
    StopRedYellow,
    StopGreen,
    StopSign,
    AccelGreenBeforeStop,
    AccelGreenAfterStop,
    AccelStopSign,
    StandardFollow(u8),
    IntersectionFollow(u8),
}

/// Coarse grouping used by the quality summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BehaviorCategory {
    Stopping,
    Accelerating,
    CarFollowing,
    All,
}

impl BehaviorCategory {
    pub fn contains(self, label: BehaviorLabel) -> bool {
        self == BehaviorCategory::All || label.category() == self
    }

    pub fn title(self) -> &'static str {
        match self {
            BehaviorCategory::Stopping => "Stopping behaviors",
            BehaviorCategory::Accelerating => "Accelerating behaviors",
            BehaviorCategory::CarFollowing => "Car-following behaviors",
            BehaviorCategory::All => "All behaviors",
        }
    }
}

impl FromStr for BehaviorCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stopping" | "stop" => Ok(BehaviorCategory::Stopping),
            "accelerating" | "accel" => Ok(BehaviorCategory::Accelerating),
            "car-following" | "following" | "car_following" => Ok(BehaviorCategory::CarFollowing),
            "all" => Ok(BehaviorCategory::All),
            other => Err(Error::invalid(format!("unknown behavior category `{other}`"))),
        }
    }
}

impl BehaviorLabel {
    pub const MIN_GAP_LEVEL: u8 = 2;
    pub const MAX_GAP_LEVEL: u8 = 7;

    pub fn category(self) -> BehaviorCategory {
        use BehaviorLabel::*;
        match self {
            StopRedYellow | StopGreen | StopSign => BehaviorCategory::Stopping,
            AccelGreenBeforeStop | AccelGreenAfterStop | AccelStopSign => {
                BehaviorCategory::Accelerating
            }
            StandardFollow(_) | IntersectionFollow(_) => BehaviorCategory::CarFollowing,
        }
    }

    pub fn is_stopping(self) -> bool {
        self.category() == BehaviorCategory::Stopping
    }

    pub fn is_accelerating(self) -> bool {
        self.category() == BehaviorCategory::Accelerating
    }

    pub fn is_car_following(self) -> bool {
        self.category() == BehaviorCategory::CarFollowing
    }

    pub fn gap_level(self) -> Option<u8> {
        match self {
            BehaviorLabel::StandardFollow(g) | BehaviorLabel::IntersectionFollow(g) => Some(g),
            _ => None,
        }
    }

    /// Rejects gap levels outside 2..=7.
    pub fn validated(self) -> Result<Self> {
        match self.gap_level() {
            Some(g) if !(Self::MIN_GAP_LEVEL..=Self::MAX_GAP_LEVEL).contains(&g) => {
                Err(Error::invalid(format!("gap level {g} outside 2..=7")))
            }
            _ => Ok(self),
        }
    }

    /// Short machine-friendly identifier, e.g. `stop-sign` or `standard-follow-4`.
    pub fn slug(self) -> String {
        use BehaviorLabel::*;
        match self {
            StopRedYellow => "stop-red-yellow".into(),
            StopGreen => "stop-green".into(),
            StopSign => "stop-sign".into(),
            AccelGreenBeforeStop => "accel-green-before-stop".into(),
            AccelGreenAfterStop => "accel-green-after-stop".into(),
            AccelStopSign => "accel-stop-sign".into(),
            StandardFollow(g) => format!("standard-follow-{g}"),
            IntersectionFollow(g) => format!("intersection-follow-{g}"),
        }
    }
}

impl fmt::Display for BehaviorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use BehaviorLabel::*;
        match self {
            StopRedYellow => f.write_str("Stop before a red and yellow light"),
            StopGreen => f.write_str("Stop before a green light"),
            StopSign => f.write_str("Stop before a stop sign"),
            AccelGreenBeforeStop => {
                f.write_str("Accelerate after permission at a green light (Before a stop)")
            }
            AccelGreenAfterStop => {
                f.write_str("Accelerate after permission at a green light (After a stop)")
            }
            AccelStopSign => f.write_str("Accelerate after permission at a stop sign"),
            StandardFollow(g) => write!(f, "Standard car-following behavior (Gap level {g})"),
            IntersectionFollow(g) => write!(
                f,
                "Car-following behavior when proceeding straight through the intersection (Gap level {g})"
            ),
        }
    }
}

/// Accepts either the slug or the long descriptive label (case-insensitive).
impl FromStr for BehaviorLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use BehaviorLabel::*;
        let norm = s.trim().to_ascii_lowercase();
        let fixed = [
            StopRedYellow,
            StopGreen,
            StopSign,
            AccelGreenBeforeStop,
            AccelGreenAfterStop,
            AccelStopSign,
        ];
        for label in fixed {
            if norm == label.slug() || norm == label.to_string().to_ascii_lowercase() {
                return Ok(label);
            }
        }
        let gap_from = |rest: &str| -> Option<u8> {
            rest.trim_end_matches(')').trim().parse().ok()
        };
        let parsed = if let Some(rest) = norm.strip_prefix("standard-follow-") {
            gap_from(rest).map(StandardFollow)
        } else if let Some(rest) = norm.strip_prefix("intersection-follow-") {
            gap_from(rest).map(IntersectionFollow)
        } else if let Some(rest) = norm.strip_prefix("standard car-following behavior (gap level ") {
            gap_from(rest).map(StandardFollow)
        } else if let Some(rest) = norm.strip_prefix(
            "car-following behavior when proceeding straight through the intersection (gap level ",
        ) {
            gap_from(rest).map(IntersectionFollow)
        } else {
            None
        };
        parsed
            .ok_or_else(|| Error::invalid(format!("unknown behavior label `{}`", s.trim())))?
            .validated()
    }
}

/// Manually annotated events of one segment. Timestamps are absolute seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub stop_time: Option<f64>,
    pub green_time: Option<f64>,
    pub permission_time: Option<f64>,
    pub stop_line_lat: f64,
    pub stop_line_lon: f64,
}

/// On-disk form of an annotation: ISO 8601 timestamps, decimal degrees.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green_time: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permission_time: Option<String>,
    pub stop_line_lat: f64,
    pub stop_line_lon: f64,
}

impl AnnotationRecord {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: AnnotationFile = serde_json::from_str(text)?;
        let parse = |v: &Option<String>| -> Result<Option<f64>> {
            v.as_deref()
                .map(|s| {
                    trajectory::parse_time(s)
                        .map(|(t, _)| t)
                        .ok_or_else(|| Error::invalid(format!("bad annotation timestamp `{s}`")))
                })
                .transpose()
        };
        Ok(AnnotationRecord {
            stop_time: parse(&file.stop_time)?,
            green_time: parse(&file.green_time)?,
            permission_time: parse(&file.permission_time)?,
            stop_line_lat: file.stop_line_lat,
            stop_line_lon: file.stop_line_lon,
        })
    }

    pub fn to_json(&self, utc_offset_s: i32) -> Result<String> {
        let fmt = |t: Option<f64>| t.map(|t| trajectory::format_time(t, utc_offset_s));
        let file = AnnotationFile {
            stop_time: fmt(self.stop_time),
            green_time: fmt(self.green_time),
            permission_time: fmt(self.permission_time),
            stop_line_lat: self.stop_line_lat,
            stop_line_lon: self.stop_line_lon,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Checks the record against a segment time span `[t0, t1]`.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.stop_line_lat)
            || !(-180.0..=180.0).contains(&self.stop_line_lon)
        {
            return Err(Error::invalid("stop line coordinates out of range"));
        }
        for (name, t) in [
            ("stop_time", self.stop_time),
            ("green_time", self.green_time),
            ("permission_time", self.permission_time),
        ] {
            if let Some(t) = t {
                if t < t0 || t > t1 {
                    return Err(Error::invalid(format!(
                        "{name} {t} outside segment span [{t0}, {t1}]"
                    )));
                }
            }
        }
        if let (Some(stop), Some(perm)) = (self.stop_time, self.permission_time) {
            if perm < stop {
                return Err(Error::invalid(format!(
                    "permission_time {perm} precedes stop_time {stop}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Following,
    PermissionStopping,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Following => f.write_str("Following"),
            Mode::PermissionStopping => f.write_str("PermissionStopping"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeDecision {
    pub mode: Mode,
    pub lead_distance: Option<f64>,
    pub threshold: f64,
}

/// Following when a lead is present within `threshold` (inclusive), else
/// permission-based stopping.
pub fn decide_mode(lead_present: bool, lead_distance: f64, threshold: f64) -> ModeDecision {
    decide_mode_with(lead_present, lead_distance, threshold, true)
}

/// As [`decide_mode`], with a choice of whether `lead_distance == threshold`
/// still follows.
pub fn decide_mode_with(
    lead_present: bool,
    lead_distance: f64,
    threshold: f64,
    inclusive: bool,
) -> ModeDecision {
    let within = if inclusive { lead_distance <= threshold } else { lead_distance < threshold };
    let mode = if lead_present && within { Mode::Following } else { Mode::PermissionStopping };
    ModeDecision { mode, lead_distance: lead_present.then_some(lead_distance), threshold }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Delay {
    /// Seconds from the anchor to the first moving sample.
    Resolved(f64),
    /// The vehicle never exceeded the motion threshold after the anchor.
    Unresolved,
}

impl Delay {
    pub fn seconds(self) -> Option<f64> {
        match self {
            Delay::Resolved(s) => Some(s),
            Delay::Unresolved => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReactionDelays {
    pub green_to_motion: Option<Delay>,
    pub permission_to_motion: Option<Delay>,
}

/// Delay between an annotated anchor (green light, driver permission) and
/// the first follower sample moving faster than `motion_threshold`.
pub fn reaction_delays(
    seg: &TrajectorySegment,
    ann: &AnnotationRecord,
    motion_threshold: f64,
) -> Result<ReactionDelays> {
    let (t0, t1) = seg.time_span();
    ann.validate(t0, t1)?;
    let delay_from = |anchor: f64| -> Delay {
        seg.points
            .iter()
            .find(|p| p.t >= anchor && p.raw.speed > motion_threshold)
            .map_or(Delay::Unresolved, |p| Delay::Resolved(p.t - anchor))
    };
    Ok(ReactionDelays {
        green_to_motion: ann.green_time.map(delay_from),
        permission_to_motion: ann.permission_time.map(delay_from),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: BehaviorLabel,
    pub passed: bool,
    pub reasons: Vec<String>,
}

/// Duration of the terminal plateau a stopping segment must show (s).
const STOP_PLATEAU_S: f64 = 0.5;

/// Structural checks that a segment looks like its label says.
pub fn validate_label(seg: &TrajectorySegment, motion_threshold: f64) -> LabelReport {
    let mut reasons = Vec::new();
    let label = seg.behavior;
    let pts = &seg.points;

    if label.is_stopping() {
        let t_end = pts.last().map_or(0.0, |p| p.t);
        let plateau: Vec<_> = pts.iter().filter(|p| p.t >= t_end - STOP_PLATEAU_S).collect();
        if plateau.len() < 2 || plateau.iter().any(|p| p.raw.speed >= motion_threshold) {
            let v_end = pts.last().map_or(f64::NAN, |p| p.raw.speed);
            reasons.push(format!("no near-zero terminal speed plateau (final speed {v_end} m/s)"));
        }
    }
    if label == BehaviorLabel::AccelGreenAfterStop || label == BehaviorLabel::AccelStopSign {
        if let Some(first) = pts.first() {
            if first.raw.speed >= motion_threshold {
                reasons.push(format!("nonzero initial speed ({} m/s)", first.raw.speed));
            }
        }
    }
    if label.is_car_following() {
        let missing: Vec<String> =
            pts.iter().filter(|p| p.lead.is_none()).map(|p| p.t.to_string()).collect();
        if !missing.is_empty() {
            reasons.push(format!(
                "{} sample(s) without leader at t = {}",
                missing.len(),
                missing.join(", ")
            ));
        }
    }
    LabelReport { label, passed: reasons.is_empty(), reasons }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{Fix, TrajectoryPoint};

    fn seg_from_speeds(label: BehaviorLabel, speeds: &[f64]) -> TrajectorySegment {
        let points = speeds
            .iter()
            .enumerate()
            .map(|(i, &v)| TrajectoryPoint::new(100.0 + i as f64 * 0.1, 43.0, -89.0, v))
            .collect();
        TrajectorySegment::new("t", points, label, 17.88)
    }

    #[test]
    fn labels_round_trip_through_text() {
        let all = [
            BehaviorLabel::StopRedYellow,
            BehaviorLabel::StopGreen,
            BehaviorLabel::StopSign,
            BehaviorLabel::AccelGreenBeforeStop,
            BehaviorLabel::AccelGreenAfterStop,
            BehaviorLabel::AccelStopSign,
            BehaviorLabel::StandardFollow(4),
            BehaviorLabel::IntersectionFollow(7),
        ];
        for l in all {
            assert_eq!(l.to_string().parse::<BehaviorLabel>().unwrap(), l);
            assert_eq!(l.slug().parse::<BehaviorLabel>().unwrap(), l);
        }
        assert!("standard-follow-9".parse::<BehaviorLabel>().is_err());
        assert!("turn left".parse::<BehaviorLabel>().is_err());
    }

    #[test]
    fn mode_examples() {
        assert_eq!(decide_mode(true, 40.0, 90.0).mode, Mode::Following);
        assert_eq!(decide_mode(true, 60.0, 90.0).mode, Mode::Following);
        assert_eq!(decide_mode(true, 150.0, 90.0).mode, Mode::PermissionStopping);
        assert_eq!(decide_mode(false, 10.0, 90.0).mode, Mode::PermissionStopping);
        assert_eq!(decide_mode(false, 10.0, 90.0).lead_distance, None);
        // boundary
        assert_eq!(decide_mode(true, 90.0, 90.0).mode, Mode::Following);
        assert_eq!(decide_mode_with(true, 90.0, 90.0, false).mode, Mode::PermissionStopping);
    }

    #[test]
    fn already_moving_at_green() {
        let seg = seg_from_speeds(BehaviorLabel::AccelGreenBeforeStop, &[5.0; 20]);
        let ann = AnnotationRecord { green_time: Some(100.5), ..Default::default() };
        let d = reaction_delays(&seg, &ann, DEFAULT_MOTION_THRESHOLD).unwrap();
        assert_eq!(d.green_to_motion, Some(Delay::Resolved(0.0)));
        assert_eq!(d.permission_to_motion, None);
    }

    #[test]
    fn permission_delay_from_constructed_ramp() {
        // at rest until permission + 0.8 s, then ramping at 1 m/s^2
        let dt = 0.1;
        let permission = 100.0 + 2.0;
        let speeds: Vec<f64> = (0..80)
            .map(|i| {
                let t = 100.0 + i as f64 * dt;
                (t - (permission + 0.8)).max(0.0) * 1.0
            })
            .collect();
        let seg = seg_from_speeds(BehaviorLabel::AccelGreenAfterStop, &speeds);
        let ann = AnnotationRecord {
            stop_time: Some(100.5),
            permission_time: Some(permission),
            ..Default::default()
        };
        let d = reaction_delays(&seg, &ann, DEFAULT_MOTION_THRESHOLD).unwrap();
        let delay = d.permission_to_motion.unwrap().seconds().unwrap();
        // motion threshold 0.3 m/s at 1 m/s^2 adds 0.3 s of ramp
        assert!((delay - 1.1).abs() <= dt + 1e-9, "delay {delay}");

        let d_low = reaction_delays(&seg, &ann, 0.0).unwrap();
        let delay = d_low.permission_to_motion.unwrap().seconds().unwrap();
        assert!((delay - 0.8).abs() <= dt + 1e-9, "delay {delay}");
    }

    #[test]
    fn never_moves_is_unresolved() {
        let seg = seg_from_speeds(BehaviorLabel::StopGreen, &[0.0; 30]);
        let ann = AnnotationRecord { green_time: Some(101.0), ..Default::default() };
        let d = reaction_delays(&seg, &ann, DEFAULT_MOTION_THRESHOLD).unwrap();
        assert_eq!(d.green_to_motion, Some(Delay::Unresolved));
    }

    #[test]
    fn permission_before_stop_rejected() {
        let seg = seg_from_speeds(BehaviorLabel::StopGreen, &[0.0; 30]);
        let ann = AnnotationRecord {
            stop_time: Some(102.0),
            permission_time: Some(101.0),
            ..Default::default()
        };
        assert!(matches!(
            reaction_delays(&seg, &ann, DEFAULT_MOTION_THRESHOLD),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn stop_sign_plateau_passes() {
        let mut speeds: Vec<f64> = (0..50).map(|i| 5.0 - i as f64 * 0.1).collect();
        speeds.extend([0.1; 10]);
        let r = validate_label(&seg_from_speeds(BehaviorLabel::StopSign, &speeds), 0.3);
        assert!(r.passed, "{:?}", r.reasons);

        let r = validate_label(&seg_from_speeds(BehaviorLabel::StopSign, &[5.0; 20]), 0.3);
        assert!(!r.passed);
    }

    #[test]
    fn after_stop_must_start_at_rest() {
        let r = validate_label(&seg_from_speeds(BehaviorLabel::AccelGreenAfterStop, &[8.0; 20]), 0.3);
        assert!(!r.passed);
        assert!(r.reasons[0].contains("nonzero initial speed"));
    }

    #[test]
    fn leaderless_samples_listed() {
        let mut seg = seg_from_speeds(BehaviorLabel::StandardFollow(4), &[10.0; 10]);
        for (i, p) in seg.points.iter_mut().enumerate() {
            if ![3, 4, 7].contains(&i) {
                p.lead = Some(Fix { lat: 43.001, lon: -89.0, speed: 10.0 });
            }
        }
        let r = validate_label(&seg, 0.3);
        assert!(!r.passed);
        assert_eq!(r.reasons.len(), 1);
        let expected: Vec<String> =
            [3, 4, 7].iter().map(|&i| seg.points[i].t.to_string()).collect();
        assert!(r.reasons[0].starts_with("3 sample(s)"));
        assert!(r.reasons[0].ends_with(&expected.join(", ")), "{}", r.reasons[0]);
    }

    #[test]
    fn annotation_json_round_trip() {
        let ann = AnnotationRecord {
            stop_time: Some(1_717_293_604.5),
            green_time: None,
            permission_time: Some(1_717_293_610.0),
            stop_line_lat: 43.07,
            stop_line_lon: -89.4,
        };
        let json = ann.to_json(-5 * 3600).unwrap();
        assert!(json.contains("-05:00"));
        assert_eq!(AnnotationRecord::from_json(&json).unwrap(), ann);
    }
}
