//! Synthetic trajectories with known ground truth.
//!
//! Vehicles drive due north from a fixed origin, so haversine arclength along
//! the emitted fixes recovers the simulated positions. Noise, when requested,
//! is Gaussian on speed only and positions are re-integrated from the noisy
//! speeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::behavior::{AnnotationRecord, BehaviorLabel};
use crate::error::{Error, Result};
use crate::fvdm::{simulate, FvdmParams, LeaderSpec, SimState};
use crate::trajectory::{LeaderTrack, LongitudinalSeries, TrajectoryPoint, TrajectorySegment};
use crate::units::{mph_to_mps, DT_NOMINAL, EARTH_RADIUS_M};

/// Reference origin (degrees), on a north-south arterial.
pub const ORIGIN: (f64, f64) = (43.0731, -89.4012);

/// Speed (m/s) at which a stopping vehicle counts as at rest.
pub const REST_SPEED: f64 = 0.05;

/// Start time of synthetic segments (Unix seconds).
pub const EPOCH_START: f64 = 1_700_000_000.0;

/// Latitude/longitude of the point `x` metres due north of [`ORIGIN`].
pub fn fix_at(x: f64) -> (f64, f64) {
    (ORIGIN.0 + (x / EARTH_RADIUS_M).to_degrees(), ORIGIN.1)
}

/// Leader speed schedule through the given waypoints: hold each for
/// `hold_s`, change between them at `accel_limit` (m/s^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub waypoints: Vec<f64>,
    pub accel_limit: f64,
    pub hold_s: f64,
}

impl SpeedProfile {
    /// The oscillation 40, 30, 20, 30, 40 mph.
    pub fn oscillation() -> Self {
        SpeedProfile {
            waypoints: [40.0, 30.0, 20.0, 30.0, 40.0].iter().map(|&m| mph_to_mps(m)).collect(),
            accel_limit: 1.0,
            hold_s: 15.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() || self.waypoints.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("speed waypoints must be positive"));
        }
        if !(self.accel_limit > 0.0) || !(self.hold_s >= 0.0) {
            return Err(Error::invalid("accel_limit must be positive and hold_s non-negative"));
        }
        Ok(())
    }

    /// Speed at `k * dt` for every step of the schedule.
    pub fn speeds(&self, dt: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let hold = (self.hold_s / dt).round() as usize;
        let mut v = vec![self.waypoints[0]; hold.max(1)];
        for w in self.waypoints.windows(2) {
            let mut cur = w[0];
            let step = self.accel_limit * dt;
            while (w[1] - cur).abs() > step {
                cur += step * (w[1] - cur).signum();
                v.push(cur);
            }
            v.extend(std::iter::repeat_n(w[1], hold.max(1)));
        }
        Ok(v)
    }
}

/// Leader track (from `x0`) following `speeds` with the same
/// semi-implicit update as the follower.
pub fn leader_track(speeds: &[f64], x0: f64, dt: f64) -> LeaderTrack {
    let mut x = x0;
    let mut pos = Vec::with_capacity(speeds.len());
    for (k, &v) in speeds.iter().enumerate() {
        if k > 0 {
            x += v * dt;
        }
        pos.push(x);
    }
    LeaderTrack {
        t: (0..speeds.len()).map(|k| k as f64 * dt).collect(),
        position: pos,
        speed: speeds.to_vec(),
    }
}

/// Speed noise with positions re-integrated so that `x[k] - x[k-1]` moves
/// by `(v_noisy[k] - v[k]) * dt`. Zero `std` returns the inputs untouched.
fn add_noise(x: &[f64], v: &[f64], std: f64, dt: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    if std == 0.0 {
        return Ok((x.to_vec(), v.to_vec()));
    }
    let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(format!("noise std: {e}")))?;
    let vn: Vec<f64> = v.iter().map(|&s| (s + normal.sample(rng)).max(0.0)).collect();
    let mut xn = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        if k == 0 {
            xn.push(x[0]);
        } else {
            xn.push(xn[k - 1] + (x[k] - x[k - 1]) + (vn[k] - v[k]) * dt);
        }
    }
    Ok((xn, vn))
}

fn check_noise(std: f64) -> Result<()> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::invalid(format!("noise std must be >= 0, got {std}")));
    }
    Ok(())
}

/// Builds a segment from positions on the reference path.
pub fn segment_from_tracks(
    id: &str,
    label: BehaviorLabel,
    desired_speed: f64,
    t: &[f64],
    follower: (&[f64], &[f64]),
    leader: Option<(&[f64], &[f64])>,
) -> TrajectorySegment {
    let points = (0..t.len())
        .map(|k| {
            let (lat, lon) = fix_at(follower.0[k]);
            let p = TrajectoryPoint::new(EPOCH_START + t[k], lat, lon, follower.1[k]);
            match leader {
                Some((lx, lv)) => {
                    let (la, lo) = fix_at(lx[k]);
                    p.with_lead(la, lo, lv[k])
                }
                None => p,
            }
        })
        .collect();
    TrajectorySegment::new(id, points, label, desired_speed)
}

/// Segment view of a simulation (leader columns when the run had a finite
/// leader other than a stop line).
pub fn segment_from_series(
    id: &str,
    label: BehaviorLabel,
    desired_speed: f64,
    series: &LongitudinalSeries,
    include_leader: bool,
) -> TrajectorySegment {
    let lead = series
        .leader
        .as_ref()
        .filter(|_| include_leader)
        .map(|l| (l.position.as_slice(), l.speed.as_slice()));
    segment_from_tracks(id, label, desired_speed, &series.t, (&series.position, &series.speed), lead)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationConfig {
    pub profile: SpeedProfile,
    pub label: BehaviorLabel,
    pub noise_std: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        OscillationConfig {
            profile: SpeedProfile::oscillation(),
            label: BehaviorLabel::StandardFollow(4),
            noise_std: 0.0,
            seed: 0,
            dt: DT_NOMINAL,
        }
    }
}

/// Leader on the speed profile, follower simulated behind it from the
/// equilibrium spacing at the first waypoint. `params.v_max` must exceed
/// every waypoint.
pub fn synth_oscillation(id: &str, params: &FvdmParams, cfg: &OscillationConfig) -> Result<TrajectorySegment> {
    params.validate()?;
    check_noise(cfg.noise_std)?;
    let speeds = cfg.profile.speeds(cfg.dt)?;
    let u0 = speeds[0];
    if cfg.profile.waypoints.iter().any(|&w| w >= params.v_max) {
        return Err(Error::invalid(format!(
            "every waypoint must be below v_max = {} m/s",
            params.v_max
        )));
    }
    let gap = params.equilibrium_spacing(u0);
    let leader = leader_track(&speeds, gap, cfg.dt);
    let horizon = (speeds.len() - 1) as f64 * cfg.dt;
    let out = simulate(
        SimState { t: 0.0, x: 0.0, v: u0 },
        &LeaderSpec::Recorded(leader.clone()),
        params,
        cfg.dt,
        horizon,
    )?;
    if let Some(c) = out.collision {
        return Err(Error::Collision { t: c.t, spacing: c.spacing });
    }
    let s = &out.series;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (fx, fv) = add_noise(&s.position, &s.speed, cfg.noise_std, cfg.dt, &mut rng)?;
    let (lx, lv) = add_noise(&leader.position, &leader.speed, cfg.noise_std, cfg.dt, &mut rng)?;
    let mut seg = segment_from_tracks(id, cfg.label.validated()?, params.v_max, &s.t, (&fx, &fv), Some((&lx, &lv)));
    seg.dt_nominal = cfg.dt;
    Ok(seg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    pub label: BehaviorLabel,
    pub initial_speed: f64,
    /// Distance from the first sample to the stop line (m).
    pub stop_line_m: f64,
    /// Standstill kept after the stop (s).
    pub plateau_s: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for StoppingConfig {
    fn default() -> Self {
        StoppingConfig {
            label: BehaviorLabel::StopRedYellow,
            initial_speed: mph_to_mps(35.0),
            stop_line_m: 150.0,
            plateau_s: 2.0,
            noise_std: 0.0,
            seed: 0,
            dt: DT_NOMINAL,
        }
    }
}

/// Approach to a stop line under a stationary virtual leader, cut
/// `plateau_s` after the vehicle comes to rest. The annotation holds the
/// stop line and the stop time.
pub fn synth_stopping(id: &str, params: &FvdmParams, cfg: &StoppingConfig) -> Result<TrajectorySegment> {
    check_noise(cfg.noise_std)?;
    if !cfg.label.is_stopping() {
        return Err(Error::invalid(format!("{} is not a stopping label", cfg.label)));
    }
    let out = simulate(
        SimState { t: 0.0, x: 0.0, v: cfg.initial_speed },
        &LeaderSpec::VirtualStopped(cfg.stop_line_m),
        params,
        cfg.dt,
        300.0,
    )?;
    if let Some(c) = out.collision {
        return Err(Error::Collision { t: c.t, spacing: c.spacing });
    }
    let s = &out.series;
    let stop = s
        .speed
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &v)| v <= REST_SPEED)
        .map(|(k, _)| k)
        .ok_or_else(|| Error::invalid("vehicle did not come to rest within 300 s"))?;
    let end = (stop + (cfg.plateau_s / cfg.dt).round() as usize).min(s.len() - 1);
    let s = s.slice(0..end + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (fx, fv) = add_noise(&s.position, &s.speed, cfg.noise_std, cfg.dt, &mut rng)?;
    let mut seg = segment_from_tracks(id, cfg.label, params.v_max, &s.t, (&fx, &fv), None);
    seg.dt_nominal = cfg.dt;
    let (lat, lon) = fix_at(cfg.stop_line_m);
    seg.annotation = Some(AnnotationRecord {
        stop_time: Some(EPOCH_START + s.t[stop]),
        green_time: None,
        permission_time: None,
        stop_line_lat: lat,
        stop_line_lon: lon,
    });
    Ok(seg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceleratingConfig {
    pub label: BehaviorLabel,
    /// Standstill before permission (s).
    pub wait_s: f64,
    pub duration_s: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub dt: f64,
}

impl Default for AcceleratingConfig {
    fn default() -> Self {
        AcceleratingConfig {
            label: BehaviorLabel::AccelGreenAfterStop,
            wait_s: 1.0,
            duration_s: 20.0,
            noise_std: 0.0,
            seed: 0,
            dt: DT_NOMINAL,
        }
    }
}

/// Start from rest at the stop line under a free virtual leader after a
/// standstill of `wait_s`; permission (and green) time is the end of the wait.
pub fn synth_accelerating(id: &str, params: &FvdmParams, cfg: &AcceleratingConfig) -> Result<TrajectorySegment> {
    check_noise(cfg.noise_std)?;
    if !cfg.label.is_accelerating() {
        return Err(Error::invalid(format!("{} is not an accelerating label", cfg.label)));
    }
    let out = simulate(SimState { t: 0.0, x: 0.0, v: 0.0 }, &LeaderSpec::VirtualFree, params, cfg.dt, cfg.duration_s)?;
    let wait = (cfg.wait_s / cfg.dt).round() as usize;
    let n = wait + out.series.len();
    let t: Vec<f64> = (0..n).map(|k| k as f64 * cfg.dt).collect();
    let mut x = vec![0.0; wait];
    x.extend(&out.series.position);
    let mut v = vec![0.0; wait];
    v.extend(&out.series.speed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (fx, fv) = add_noise(&x, &v, cfg.noise_std, cfg.dt, &mut rng)?;
    let mut seg = segment_from_tracks(id, cfg.label, params.v_max, &t, (&fx, &fv), None);
    seg.dt_nominal = cfg.dt;
    let (lat, lon) = fix_at(1.0);
    let go = EPOCH_START + t[wait];
    seg.annotation = Some(AnnotationRecord {
        stop_time: if cfg.label == BehaviorLabel::AccelGreenBeforeStop { None } else { Some(EPOCH_START) },
        green_time: Some(go),
        permission_time: Some(go),
        stop_line_lat: lat,
        stop_line_lon: lon,
    });
    Ok(seg)
}
