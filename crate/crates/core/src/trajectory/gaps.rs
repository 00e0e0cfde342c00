use super::{Accuracy, Fix, TrajectoryPoint, TrajectorySegment};
use crate::error::{Error, Gap, Result};

pub const DEFAULT_MAX_GAP_S: f64 = 1.0;

/// Intervals longer than this multiple of `dt_nominal` hold missing samples.
const MISSING_FACTOR: f64 = 1.5;

/// Fills missing samples by linear interpolation of every present field.
///
/// Holes up to `max_gap` seconds are filled at (evenly subdivided) nominal
/// spacing. Any hole wider than `max_gap` is reported as
/// [`Error::GapTooLarge`] with its bounding timestamps; use
/// [`split_at_gaps`] to break such a segment apart instead.
pub fn interpolate_gaps(seg: &TrajectorySegment, max_gap: f64) -> Result<TrajectorySegment> {
    if !(max_gap > seg.dt_nominal) {
        return Err(Error::invalid(format!(
            "max_gap {max_gap} s must exceed dt_nominal {} s",
            seg.dt_nominal
        )));
    }
    let too_large = large_gaps(seg, max_gap);
    if !too_large.is_empty() {
        return Err(Error::GapTooLarge { max_gap, gaps: too_large });
    }
    Ok(fill(seg))
}

/// Splits at holes wider than `max_gap` and fills the smaller ones inside each
/// piece. Returns the filled pieces (ids suffixed `#k` when split) and the
/// holes that were not bridged.
pub fn split_at_gaps(
    seg: &TrajectorySegment,
    max_gap: f64,
) -> Result<(Vec<TrajectorySegment>, Vec<Gap>)> {
    if !(max_gap > seg.dt_nominal) {
        return Err(Error::invalid("max_gap must exceed dt_nominal"));
    }
    let gaps = large_gaps(seg, max_gap);
    if gaps.is_empty() {
        return Ok((vec![fill(seg)], gaps));
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut cut = |end: usize, pieces: &mut Vec<TrajectorySegment>| {
        let mut piece = seg.clone();
        piece.points = seg.points[start..end].to_vec();
        piece.id = format!("{}#{}", seg.id, pieces.len());
        start = end;
        pieces.push(fill(&piece));
    };
    for (i, w) in seg.points.windows(2).enumerate() {
        if w[1].t - w[0].t > max_gap + 1e-9 {
            cut(i + 1, &mut pieces);
        }
    }
    cut(seg.points.len(), &mut pieces);
    Ok((pieces, gaps))
}

fn large_gaps(seg: &TrajectorySegment, max_gap: f64) -> Vec<Gap> {
    seg.points
        .windows(2)
        .filter(|w| w[1].t - w[0].t > max_gap + 1e-9)
        .map(|w| Gap { start: w[0].t, end: w[1].t })
        .collect()
}

fn fill(seg: &TrajectorySegment) -> TrajectorySegment {
    let dt = seg.dt_nominal;
    let mut points = Vec::with_capacity(seg.points.len());
    for (i, p) in seg.points.iter().enumerate() {
        if i > 0 {
            let prev = &seg.points[i - 1];
            let span = p.t - prev.t;
            if span > MISSING_FACTOR * dt {
                let steps = (span / dt).round().max(2.0) as usize;
                for k in 1..steps {
                    let w = k as f64 / steps as f64;
                    points.push(lerp_point(prev, p, w));
                }
            }
        }
        points.push(*p);
    }
    TrajectorySegment { points, ..seg.clone() }
}

fn lerp_point(a: &TrajectoryPoint, b: &TrajectoryPoint, w: f64) -> TrajectoryPoint {
    let lerp = |x: f64, y: f64| x + (y - x) * w;
    let fix = |x: &Fix, y: &Fix| Fix {
        lat: lerp(x.lat, y.lat),
        lon: lerp(x.lon, y.lon),
        speed: lerp(x.speed, y.speed),
    };
    let opt = |x: Option<Fix>, y: Option<Fix>| match (x, y) {
        (Some(x), Some(y)) => Some(fix(&x, &y)),
        _ => None,
    };
    TrajectoryPoint {
        t: lerp(a.t, b.t),
        raw: fix(&a.raw, &b.raw),
        smoothed: opt(a.smoothed, b.smoothed),
        lead: opt(a.lead, b.lead),
        lead_smoothed: opt(a.lead_smoothed, b.lead_smoothed),
        accuracy: Accuracy::default(),
    }
}
