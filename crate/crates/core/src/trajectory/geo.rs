use super::{Fix, LeaderTrack, LongitudinalSeries, Source, TrajectorySegment};
use crate::error::{Error, Result};
use crate::units::EARTH_RADIUS_M;

/// Great-circle distance in metres between two fixes given in degrees.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Polyline of fixes with cumulative haversine arclength.
#[derive(Debug, Clone)]
pub struct PathChain {
    lat: Vec<f64>,
    lon: Vec<f64>,
    cum: Vec<f64>,
    /// Indices of pieces `i -> i+1` with nonzero length.
    pieces: Vec<usize>,
}

/// How far past the time-aligned index a leader search looks, beyond the
/// straight-line distance (m).
const SEARCH_SLACK_M: f64 = 200.0;
/// Pieces before the time-aligned index included in a leader search.
const SEARCH_BACK: usize = 50;

impl PathChain {
    pub fn new(fixes: &[(f64, f64)]) -> Self {
        let lat: Vec<f64> = fixes.iter().map(|f| f.0).collect();
        let lon: Vec<f64> = fixes.iter().map(|f| f.1).collect();
        let mut cum = Vec::with_capacity(fixes.len());
        let mut pieces = Vec::new();
        let mut acc = 0.0;
        for i in 0..fixes.len() {
            if i > 0 {
                let d = haversine(lat[i - 1], lon[i - 1], lat[i], lon[i]);
                if d > 0.0 {
                    pieces.push(i - 1);
                }
                acc += d;
            }
            cum.push(acc);
        }
        PathChain { lat, lon, cum, pieces }
    }

    /// Cumulative arclength at each fix; the first is 0.
    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Arclength of the point on the chain closest to `(lat, lon)`. The first
    /// and last nonzero pieces extend past the chain ends.
    pub fn project(&self, lat: f64, lon: f64) -> f64 {
        self.project_range(lat, lon, 0, self.pieces.len())
    }

    /// As [`project`](Self::project) but searching only near fix `hint`.
    pub fn project_near(&self, lat: f64, lon: f64, hint: usize) -> f64 {
        if self.pieces.is_empty() {
            return self.project_range(lat, lon, 0, 0);
        }
        let hint = hint.min(self.lat.len() - 1);
        let reach = haversine(self.lat[hint], self.lon[hint], lat, lon);
        let limit = self.cum[hint] + 3.0 * reach + SEARCH_SLACK_M;
        let first_piece = hint.saturating_sub(SEARCH_BACK);
        let lo = self.pieces.partition_point(|&i| i < first_piece);
        let hi = self.pieces.partition_point(|&i| self.cum[i] <= limit);
        self.project_range(lat, lon, lo, hi.max(lo + 1).min(self.pieces.len()))
    }

    fn project_range(&self, lat: f64, lon: f64, lo: usize, hi: usize) -> f64 {
        if self.pieces.is_empty() {
            // stationary chain: distance from the single location
            return match self.lat.first() {
                Some(&la) => haversine(la, self.lon[0], lat, lon),
                None => 0.0,
            };
        }
        let first = self.pieces[0];
        let last = *self.pieces.last().expect("nonempty");
        let mut best = (f64::INFINITY, 0.0);
        for &i in &self.pieces[lo..hi] {
            let (e1, n1) = local_en(self.lat[i], self.lon[i], self.lat[i + 1], self.lon[i + 1]);
            let (eq, nq) = local_en(self.lat[i], self.lon[i], lat, lon);
            let len2 = e1 * e1 + n1 * n1;
            let mut u = (eq * e1 + nq * n1) / len2;
            if i != first {
                u = u.max(0.0);
            }
            if i != last {
                u = u.min(1.0);
            }
            let (de, dn) = (eq - u * e1, nq - u * n1);
            let dist = (de * de + dn * dn).sqrt();
            if dist < best.0 {
                let piece_len = self.cum[i + 1] - self.cum[i];
                best = (dist, self.cum[i] + u * piece_len);
            }
        }
        best.1
    }
}

/// East/north offsets (m) of `(lat, lon)` from an origin, equirectangular.
fn local_en(lat0: f64, lon0: f64, lat: f64, lon: f64) -> (f64, f64) {
    let east = (lon - lon0).to_radians() * lat0.to_radians().cos() * EARTH_RADIUS_M;
    let north = (lat - lat0).to_radians() * EARTH_RADIUS_M;
    (east, north)
}

/// Projects a segment onto the follower's own path.
///
/// Positions are cumulative haversine arclength along the smoothed follower
/// fixes (raw fixes when the segment carries no smoothed columns); leader
/// fixes are projected onto the same chain and spacing is leader minus
/// follower position. Car-following segments must have a leader ahead at
/// every sample.
pub fn project_to_path(seg: &TrajectorySegment) -> Result<LongitudinalSeries> {
    if seg.points.len() < 2 {
        return Err(Error::invalid("project_to_path needs at least 2 points"));
    }
    let (source, follower): (Source, Vec<Fix>) = if seg.has_smoothed() {
        (Source::Smoothed, seg.points.iter().map(|p| p.smoothed.expect("checked")).collect())
    } else {
        (Source::Raw, seg.points.iter().map(|p| p.raw).collect())
    };
    let chain = PathChain::new(&follower.iter().map(|f| (f.lat, f.lon)).collect::<Vec<_>>());
    let t: Vec<f64> = seg.points.iter().map(|p| p.t).collect();
    let speed = follower.iter().map(|f| f.speed).collect();
    let series = LongitudinalSeries::from_kinematics(
        t.clone(),
        chain.cumulative().to_vec(),
        speed,
        seg.dt_nominal,
        source,
    );

    let lead_smoothed = seg.points.iter().all(|p| p.lead_smoothed.is_some());
    let leader_fixes: Option<Vec<Fix>> = if lead_smoothed && source == Source::Smoothed {
        seg.points.iter().map(|p| p.lead_smoothed).collect()
    } else {
        seg.points.iter().map(|p| p.lead).collect()
    };
    let Some(leader_fixes) = leader_fixes else {
        if seg.behavior.is_car_following() {
            return Err(Error::data(format!(
                "car-following segment `{}` lacks leader fixes at some samples",
                seg.id
            )));
        }
        return Ok(series);
    };

    let position: Vec<f64> = leader_fixes
        .iter()
        .enumerate()
        .map(|(i, f)| chain.project_near(f.lat, f.lon, i))
        .collect();
    let leader = LeaderTrack { t, position, speed: leader_fixes.iter().map(|f| f.speed).collect() };
    let series = series.with_leader(leader);
    if seg.behavior.is_car_following() {
        let spacing = series.spacing.as_ref().expect("leader set");
        if let Some(i) = spacing.iter().position(|&s| !(s > 0.0)) {
            return Err(Error::data(format!(
                "leader not ahead of follower at t={} (spacing {} m)",
                series.t[i], spacing[i]
            )));
        }
    }
    Ok(series)
}
