//! Calibration and quality tables as delimited text or JSON.

use std::fmt::Write as _;

use serde::Serialize;

use crate::behavior::BehaviorLabel;
use crate::calibration::CalibrationResult;
use crate::error::Result;
use crate::quality::QualityReport;

/// Row title for a calibration group.
pub fn group_title(group: &str) -> String {
    match group {
        "stopping" => "Stopping behavior".into(),
        "accelerating" => "Accelerating behavior".into(),
        other => match other.parse::<BehaviorLabel>() {
            Ok(BehaviorLabel::StandardFollow(g)) => format!("Standard car-following behavior (Gap level {g})"),
            Ok(BehaviorLabel::IntersectionFollow(g)) => format!(
                "Car-following behavior when proceeding straight through the intersection (Gap level {g})"
            ),
            _ => other.to_string(),
        },
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn calibration_table(results: &[CalibrationResult]) -> String {
    let mut out = String::from("Behavior,alpha,beta,s0,delta_s,Speed RMSE (m/s)\n");
    for r in results {
        let p = &r.params;
        let _ = writeln!(
            out,
            "{},{:.4},{:.4},{:.4},{:.4},{:.4}",
            quote(&group_title(&r.group)),
            p.alpha,
            p.beta,
            p.s0,
            p.delta_s,
            r.rmse
        );
    }
    out
}

pub fn quality_table(reports: &[QualityReport]) -> String {
    let mut out = String::from(
        "Behavior,Trajectory segments quantity,Distance (m),Duration (s),Anomaly Acceleration (%),Anomaly Jerk (%)\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{:.2},{:.2},{:.2} / {:.2},{:.2} / {:.2}",
            r.category.title(),
            r.segment_count,
            r.distance,
            r.duration,
            r.anomaly_accel_pct_raw,
            r.anomaly_accel_pct_smoothed,
            r.anomaly_jerk_pct_raw,
            r.anomaly_jerk_pct_smoothed
        );
    }
    out
}

/// Calibration table, then (if any) a blank line and the quality table.
pub fn render(results: &[CalibrationResult], quality: &[QualityReport]) -> String {
    let mut out = String::new();
    if !results.is_empty() {
        out.push_str(&calibration_table(results));
    }
    if !quality.is_empty() {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&quality_table(quality));
    }
    out
}

#[derive(Serialize)]
struct Document<'a> {
    calibration: &'a [CalibrationResult],
    quality: &'a [QualityReport],
}

pub fn render_json(results: &[CalibrationResult], quality: &[QualityReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Document { calibration: results, quality })?)
}
