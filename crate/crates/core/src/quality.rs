//! Trajectory quality metrics: share of samples whose acceleration or jerk
//! falls outside the plausible range, before and after smoothing.

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorCategory;
use crate::error::{Error, Result};
use crate::trajectory::{derivative_any_len, moving_average, PathChain, TrajectorySegment};

pub const ACCEL_BOUNDS: (f64, f64) = (-8.0, 5.0);
pub const JERK_BOUNDS: (f64, f64) = (-15.0, 15.0);

/// A quality row as reported for the field data: raw / smoothed anomaly
/// percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceQuality {
    pub category: BehaviorCategory,
    pub segment_count: usize,
    pub distance: f64,
    pub duration: f64,
    pub accel_pct: (f64, f64),
    pub jerk_pct: (f64, f64),
}

pub const REFERENCE_QUALITY: [ReferenceQuality; 4] = [
    ReferenceQuality {
        category: BehaviorCategory::Stopping,
        segment_count: 30,
        distance: 6418.25,
        duration: 582.80,
        accel_pct: (0.17, 0.00),
        jerk_pct: (1.11, 0.00),
    },
    ReferenceQuality {
        category: BehaviorCategory::Accelerating,
        segment_count: 28,
        distance: 3104.58,
        duration: 317.90,
        accel_pct: (0.24, 0.00),
        jerk_pct: (1.39, 0.00),
    },
    ReferenceQuality {
        category: BehaviorCategory::CarFollowing,
        segment_count: 31,
        distance: 25406.48,
        duration: 1981.10,
        accel_pct: (0.00, 0.00),
        jerk_pct: (0.47, 0.00),
    },
    ReferenceQuality {
        category: BehaviorCategory::All,
        segment_count: 74,
        distance: 41037.56,
        duration: 3409.50,
        accel_pct: (0.07, 0.01),
        jerk_pct: (0.84, 0.03),
    },
];

/// Samples outside the closed interval `[lo, hi]`. NaN counts as outside.
pub fn count_outside(values: &[f64], lo: f64, hi: f64) -> usize {
    values.iter().filter(|&&v| !(lo <= v && v <= hi)).count()
}

fn pct(values: &[f64], lo: f64, hi: f64, what: &str) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what} anomaly needs at least one sample")));
    }
    Ok(100.0 * count_outside(values, lo, hi) as f64 / values.len() as f64)
}

/// Percentage of samples outside `[lo, hi]` (defaults: [`ACCEL_BOUNDS`]).
pub fn anomaly_acceleration_pct(accel: &[f64], lo: f64, hi: f64) -> Result<f64> {
    pct(accel, lo, hi, "acceleration")
}

/// Percentage of samples outside `[lo, hi]` (defaults: [`JERK_BOUNDS`]).
pub fn anomaly_jerk_pct(jerk: &[f64], lo: f64, hi: f64) -> Result<f64> {
    pct(jerk, lo, hi, "jerk")
}

/// Raw anomaly counts; pooling adds these, never percentages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnomalyCounts {
    pub samples: usize,
    pub accel_raw: usize,
    pub accel_smoothed: usize,
    pub jerk_raw: usize,
    pub jerk_smoothed: usize,
}

impl std::ops::Add for AnomalyCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        AnomalyCounts {
            samples: self.samples + o.samples,
            accel_raw: self.accel_raw + o.accel_raw,
            accel_smoothed: self.accel_smoothed + o.accel_smoothed,
            jerk_raw: self.jerk_raw + o.jerk_raw,
            jerk_smoothed: self.jerk_smoothed + o.jerk_smoothed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub category: BehaviorCategory,
    pub segment_count: usize,
    /// Metres.
    pub distance: f64,
    /// Seconds.
    pub duration: f64,
    pub anomaly_accel_pct_raw: f64,
    pub anomaly_accel_pct_smoothed: f64,
    pub anomaly_jerk_pct_raw: f64,
    pub anomaly_jerk_pct_smoothed: f64,
    pub counts: AnomalyCounts,
}

impl QualityReport {
    fn from_totals(
        category: BehaviorCategory,
        segment_count: usize,
        distance: f64,
        duration: f64,
        c: AnomalyCounts,
    ) -> Self {
        let p = |k: usize| if c.samples == 0 { 0.0 } else { 100.0 * k as f64 / c.samples as f64 };
        QualityReport {
            category,
            segment_count,
            distance,
            duration,
            anomaly_accel_pct_raw: p(c.accel_raw),
            anomaly_accel_pct_smoothed: p(c.accel_smoothed),
            anomaly_jerk_pct_raw: p(c.jerk_raw),
            anomaly_jerk_pct_smoothed: p(c.jerk_smoothed),
            counts: c,
        }
    }

    /// Pools reports by adding their counts, distances and durations.
    pub fn pool(category: BehaviorCategory, parts: &[QualityReport]) -> Result<QualityReport> {
        if parts.is_empty() {
            return Err(Error::invalid("nothing to pool"));
        }
        let counts = parts.iter().fold(AnomalyCounts::default(), |a, r| a + r.counts);
        Ok(QualityReport::from_totals(
            category,
            parts.iter().map(|r| r.segment_count).sum(),
            parts.iter().map(|r| r.distance).sum(),
            parts.iter().map(|r| r.duration).sum(),
            counts,
        ))
    }
}

/// Metrics for one segment.
///
/// Raw derivatives come from the `Speed` column. Smoothed derivatives come
/// from `Speed_smoothed` when every sample has it, otherwise from a moving
/// average of `Speed` with `window_samples`. Distance is the arclength of the
/// follower fixes (smoothed when available).
pub fn assess_segment(seg: &TrajectorySegment, window_samples: usize) -> Result<QualityReport> {
    if seg.points.is_empty() {
        return Err(Error::invalid(format!("segment `{}` is empty", seg.id)));
    }
    let dt = seg.dt_nominal;
    let raw: Vec<f64> = seg.points.iter().map(|p| p.raw.speed).collect();
    let (smoothed, fixes): (Vec<f64>, Vec<(f64, f64)>) = if seg.has_smoothed() {
        let s = seg.points.iter().map(|p| p.smoothed.expect("checked"));
        s.map(|f| (f.speed, (f.lat, f.lon))).unzip()
    } else {
        let fixes = seg.points.iter().map(|p| (p.raw.lat, p.raw.lon)).collect();
        (moving_average(&raw, window_samples)?, fixes)
    };

    let a_raw = derivative_any_len(&raw, dt);
    let j_raw = derivative_any_len(&a_raw, dt);
    let a_sm = derivative_any_len(&smoothed, dt);
    let j_sm = derivative_any_len(&a_sm, dt);
    let (alo, ahi) = ACCEL_BOUNDS;
    let (jlo, jhi) = JERK_BOUNDS;
    let counts = AnomalyCounts {
        samples: raw.len(),
        accel_raw: count_outside(&a_raw, alo, ahi),
        accel_smoothed: count_outside(&a_sm, alo, ahi),
        jerk_raw: count_outside(&j_raw, jlo, jhi),
        jerk_smoothed: count_outside(&j_sm, jlo, jhi),
    };
    let chain = PathChain::new(&fixes);
    let distance = chain.cumulative().last().copied().unwrap_or(0.0);
    Ok(QualityReport::from_totals(seg.behavior.category(), 1, distance, seg.duration(), counts))
}

/// Pooled metrics over every segment of `category`.
///
/// Errors when the group is empty or a segment belongs to another category.
pub fn summarize(
    segments: &[TrajectorySegment],
    category: BehaviorCategory,
    window_samples: usize,
) -> Result<QualityReport> {
    if segments.is_empty() {
        return Err(Error::invalid(format!("no segments in group `{}`", category.title())));
    }
    let mut parts = Vec::with_capacity(segments.len());
    for seg in segments {
        if !category.contains(seg.behavior) {
            return Err(Error::invalid(format!(
                "segment `{}` ({}) is not in group `{}`",
                seg.id,
                seg.behavior,
                category.title()
            )));
        }
        parts.push(assess_segment(seg, window_samples).map_err(|e| e.in_segment(&seg.id))?);
    }
    QualityReport::pool(category, &parts)
}

/// Reports for each category present plus the pooled `All` row, in the
/// order stopping, accelerating, car-following, all.
pub fn summarize_by_category(
    segments: &[TrajectorySegment],
    window_samples: usize,
) -> Result<Vec<QualityReport>> {
    let mut out = Vec::new();
    for cat in [BehaviorCategory::Stopping, BehaviorCategory::Accelerating, BehaviorCategory::CarFollowing] {
        let group: Vec<TrajectorySegment> =
            segments.iter().filter(|s| cat.contains(s.behavior)).cloned().collect();
        if !group.is_empty() {
            out.push(summarize(&group, cat, window_samples)?);
        }
    }
    out.push(summarize(segments, BehaviorCategory::All, window_samples)?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::BehaviorLabel;
    use crate::trajectory::TrajectoryPoint;
    use crate::units::EARTH_RADIUS_M;
    use proptest::prelude::*;

    #[test]
    fn percentage_examples() {
        let a = [-8.0, 0.0, 5.0, 1.0];
        assert_eq!(anomaly_acceleration_pct(&a, -8.0, 5.0).unwrap(), 0.0);
        let mut b = vec![0.0; 10];
        b[3] = 6.0;
        assert_eq!(anomaly_acceleration_pct(&b, -8.0, 5.0).unwrap(), 10.0);
        assert_eq!(anomaly_jerk_pct(&[0.0; 7], -15.0, 15.0).unwrap(), 0.0);
        let mut j = vec![0.0; 100];
        j[10] = 20.0;
        j[90] = -20.0;
        assert_eq!(anomaly_jerk_pct(&j, -15.0, 15.0).unwrap(), 2.0);
        assert!(anomaly_jerk_pct(&[], -15.0, 15.0).is_err());
        assert!(anomaly_acceleration_pct(&[], -8.0, 5.0).is_err());
    }

    fn straight(id: &str, label: BehaviorLabel, speeds: &[f64]) -> TrajectorySegment {
        let mut x = 0.0;
        let points = speeds
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if i > 0 {
                    x += v * 0.1;
                }
                let lat = 43.0 + (x / EARTH_RADIUS_M).to_degrees();
                TrajectoryPoint::new(1.7e9 + i as f64 * 0.1, lat, -89.4, v)
            })
            .collect();
        TrajectorySegment::new(id, points, label, 20.0)
    }

    #[test]
    fn constant_speed_segment() {
        let seg = straight("c", BehaviorLabel::StandardFollow(4), &[20.0; 101]);
        let r = summarize(&[seg], BehaviorCategory::CarFollowing, 10).unwrap();
        assert_eq!(r.segment_count, 1);
        assert!((r.distance - 200.0).abs() < 1e-6, "{}", r.distance);
        assert!((r.duration - 10.0).abs() < 1e-6);
        assert_eq!(r.anomaly_accel_pct_raw, 0.0);
        assert_eq!(r.anomaly_jerk_pct_smoothed, 0.0);
    }

    #[test]
    fn wrong_category_and_empty_are_errors() {
        let seg = straight("c", BehaviorLabel::StopSign, &[1.0; 5]);
        assert!(summarize(&[seg], BehaviorCategory::CarFollowing, 10).is_err());
        assert!(summarize(&[], BehaviorCategory::All, 10).is_err());
    }

    fn noisy(seed: u64, n: usize) -> Vec<f64> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        (0..n)
            .map(|i| (10.0 + 3.0 * (i as f64 * 0.01).sin() + noise.sample(&mut rng)).max(0.0))
            .collect()
    }

    #[test]
    fn smoothing_reduces_jerk_anomalies() {
        let seg = straight("n", BehaviorLabel::StandardFollow(2), &noisy(3, 1500));
        let r = assess_segment(&seg, 10).unwrap();
        assert!(r.anomaly_jerk_pct_raw > 0.0);
        assert!(r.anomaly_jerk_pct_smoothed < r.anomaly_jerk_pct_raw);
    }

    #[test]
    fn all_pools_category_counts() {
        let segs = vec![
            straight("a", BehaviorLabel::StopSign, &noisy(1, 300)),
            straight("b", BehaviorLabel::AccelStopSign, &noisy(2, 500)),
            straight("c", BehaviorLabel::IntersectionFollow(7), &noisy(3, 200)),
        ];
        let rows = summarize_by_category(&segs, 10).unwrap();
        assert_eq!(rows.len(), 4);
        let all = rows.last().unwrap();
        // brute-force pooled count over the three groups
        let mut jerk = 0;
        let mut n = 0;
        for s in &segs {
            let v: Vec<f64> = s.points.iter().map(|p| p.raw.speed).collect();
            let a = derivative_any_len(&v, 0.1);
            jerk += count_outside(&derivative_any_len(&a, 0.1), -15.0, 15.0);
            n += v.len();
        }
        assert_eq!(all.counts.jerk_raw, jerk);
        assert_eq!(all.anomaly_jerk_pct_raw, 100.0 * jerk as f64 / n as f64);
        assert_eq!(all.segment_count, 3);
        let d: f64 = rows[..3].iter().map(|r| r.distance).sum();
        assert!((all.distance - d).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn matches_brute_force(v in prop::collection::vec(-30.0f64..30.0, 1..200)) {
            let mut brute = 0usize;
            for x in &v {
                if *x < -8.0 || *x > 5.0 {
                    brute += 1;
                }
            }
            let p = anomaly_acceleration_pct(&v, -8.0, 5.0).unwrap();
            prop_assert_eq!(p, 100.0 * brute as f64 / v.len() as f64);
        }

        #[test]
        fn reorder_invariant_and_monotone(mut v in prop::collection::vec(-40.0f64..40.0, 1..100), w in 0.0f64..10.0) {
            let p = anomaly_jerk_pct(&v, -15.0, 15.0).unwrap();
            prop_assert!((0.0..=100.0).contains(&p));
            prop_assert!(anomaly_jerk_pct(&v, -15.0 - w, 15.0 + w).unwrap() <= p);
            v.reverse();
            prop_assert_eq!(anomaly_jerk_pct(&v, -15.0, 15.0).unwrap(), p);
        }

        #[test]
        fn pooled_between_parts(seeds in prop::collection::vec(0u64..1000, 1..5)) {
            let segs: Vec<TrajectorySegment> = seeds
                .iter()
                .enumerate()
                .map(|(i, &s)| straight(&format!("s{i}"), BehaviorLabel::StopGreen, &noisy(s, 50 + 30 * i)))
                .collect();
            let parts: Vec<QualityReport> = segs.iter().map(|s| assess_segment(s, 10).unwrap()).collect();
            let all = summarize(&segs, BehaviorCategory::Stopping, 10).unwrap();
            let lo = parts.iter().map(|r| r.anomaly_jerk_pct_raw).fold(f64::INFINITY, f64::min);
            let hi = parts.iter().map(|r| r.anomaly_jerk_pct_raw).fold(0.0, f64::max);
            prop_assert!(all.anomaly_jerk_pct_raw >= lo - 1e-9 && all.anomaly_jerk_pct_raw <= hi + 1e-9);
        }
    }
}
