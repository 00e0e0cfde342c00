//! FVDM calibration: fit `alpha`, `beta`, `s0`, `delta_s` for a behavior
//! group by minimizing the pooled speed RMSE of open-loop simulations.
//!
//! Every segment keeps its own `v_max` (its configured desired speed). The
//! objective simulates each segment from its first observed state, resamples
//! the simulated speed at the observation times, and pools squared errors
//! over all samples of the group.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorLabel;
use crate::direct::{minimize, OptimizerConfig};
use crate::error::{Error, Result};
use crate::fvdm::{simulate, FvdmParams, LeaderSpec, SimState};
use crate::trajectory::{project_to_path, LeaderTrack, PathChain, TrajectorySegment};
use crate::units::DT_NOMINAL;

/// Box for the four free parameters, `(lo, hi)` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    pub s0: (f64, f64),
    pub delta_s: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        ParamBounds { alpha: (0.0, 5.0), beta: (0.0, 5.0), s0: (0.0, 10.0), delta_s: (0.1, 20.0) }
    }
}

impl ParamBounds {
    pub fn as_array(&self) -> [(f64, f64); 4] {
        [self.alpha, self.beta, self.s0, self.delta_s]
    }

    pub fn from_array(b: [(f64, f64); 4]) -> Self {
        ParamBounds { alpha: b[0], beta: b[1], s0: b[2], delta_s: b[3] }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in ["alpha", "beta", "s0", "delta_s"].iter().zip(self.as_array()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!("bounds for {name} must satisfy lo < hi, got {lo}:{hi}")));
            }
        }
        if self.alpha.0 < 0.0 || self.beta.0 < 0.0 || self.s0.0 < 0.0 {
            return Err(Error::invalid("alpha, beta and s0 bounds must be non-negative"));
        }
        if !(self.delta_s.0 > 0.0) {
            return Err(Error::invalid("delta_s lower bound must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &FvdmParams) -> bool {
        let inside = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        inside(self.alpha, p.alpha)
            && inside(self.beta, p.beta)
            && inside(self.s0, p.s0)
            && inside(self.delta_s, p.delta_s)
    }

    /// Parses `a_lo:a_hi,b_lo:b_hi,s0_lo:s0_hi,ds_lo:ds_hi`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::invalid(format!("expected 4 comma-separated lo:hi pairs, got `{text}`")));
        }
        let mut out = [(0.0, 0.0); 4];
        for (slot, part) in out.iter_mut().zip(&parts) {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| Error::invalid(format!("bound `{part}` is not lo:hi")))?;
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number `{s}` in bounds")))
            };
            *slot = (num(lo)?, num(hi)?);
        }
        let b = ParamBounds::from_array(out);
        b.validate()?;
        Ok(b)
    }
}

impl std::fmt::Display for ParamBounds {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, s, d] = self.as_array();
        write!(f, "{}:{},{}:{},{}:{},{}:{}", a.0, a.1, b.0, b.1, s.0, s.1, d.0, d.1)
    }
}

/// Calibration group of a label: all stopping labels share one, all
/// accelerating labels share one, car-following splits by kind and gap level.
pub fn calibration_group(label: BehaviorLabel) -> String {
    if label.is_stopping() {
        "stopping".to_string()
    } else if label.is_accelerating() {
        "accelerating".to_string()
    } else {
        label.slug()
    }
}

/// `sqrt(mean((simulated - observed)^2))`.
pub fn speed_rmse(simulated: &[f64], observed: &[f64]) -> Result<f64> {
    if simulated.len() != observed.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} simulated vs {} observed",
            simulated.len(),
            observed.len()
        )));
    }
    if simulated.is_empty() {
        return Err(Error::invalid("speed_rmse needs at least one sample"));
    }
    let sse: f64 = simulated.iter().zip(observed).map(|(s, o)| (s - o).powi(2)).sum();
    Ok((sse / simulated.len() as f64).sqrt())
}

/// One segment prepared for simulation. Times are relative to the window start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub segment_id: String,
    pub init: SimState,
    pub leader: LeaderSpec,
    pub v_max: f64,
    pub obs_t: Vec<f64>,
    pub obs_speed: Vec<f64>,
    pub horizon: f64,
}

/// Maps a segment to its simulation setup.
///
/// Stopping: stationary virtual leader at the projected stop line, window
/// ending at the annotated stop time. Accelerating: free virtual leader,
/// window starting at the annotated permission time when present.
/// Car-following: the recorded leader over the whole segment.
pub fn build_scenario(seg: &TrajectorySegment, dt: f64) -> Result<Scenario> {
    build_inner(seg, dt).map_err(|e| e.in_segment(&seg.id))
}

fn build_inner(seg: &TrajectorySegment, dt: f64) -> Result<Scenario> {
    let v_max = match seg.desired_speed {
        Some(v) if v > 0.0 && v.is_finite() => v,
        other => {
            return Err(Error::invalid(format!("desired speed must be positive, got {other:?}")));
        }
    };
    if seg.behavior.is_car_following() && !seg.has_lead() {
        return Err(Error::data("car-following segment has no leader columns"));
    }
    let series = project_to_path(seg)?;
    let n = series.len();
    let ann = seg.annotation.as_ref();

    let (mut i0, mut i1) = (0, n - 1);
    let leader = if seg.behavior.is_stopping() {
        let ann = ann.ok_or_else(|| Error::data("stopping segment has no stop-line annotation"))?;
        if let Some(ts) = ann.stop_time {
            i1 = series.t.partition_point(|&t| t <= ts + 1e-9).saturating_sub(1);
        }
        let fixes: Vec<(f64, f64)> = seg
            .points
            .iter()
            .map(|p| match (series.source, p.smoothed) {
                (crate::trajectory::Source::Smoothed, Some(f)) => (f.lat, f.lon),
                _ => (p.raw.lat, p.raw.lon),
            })
            .collect();
        let x_stop = PathChain::new(&fixes).project(ann.stop_line_lat, ann.stop_line_lon);
        if !(x_stop > series.position[0]) {
            return Err(Error::data(format!(
                "stop line projects to {x_stop:.2} m, not ahead of the first sample"
            )));
        }
        LeaderSpec::VirtualStopped(x_stop)
    } else if seg.behavior.is_accelerating() {
        if let Some(tp) = ann.and_then(|a| a.permission_time) {
            i0 = series.t.partition_point(|&t| t < tp - 1e-9).min(n - 1);
        }
        LeaderSpec::VirtualFree
    } else {
        let l = series.leader.as_ref().expect("car-following projection has a leader");
        let t0 = series.t[0];
        LeaderSpec::Recorded(LeaderTrack {
            t: l.t.iter().map(|t| t - t0).collect(),
            position: l.position.clone(),
            speed: l.speed.clone(),
        })
    };
    if i1 <= i0 {
        return Err(Error::data("simulation window holds fewer than 2 samples"));
    }

    let t_start = series.t[i0];
    let obs_t: Vec<f64> = series.t[i0..=i1].iter().map(|t| t - t_start).collect();
    let span = *obs_t.last().expect("nonempty");
    let steps = (span / dt + 1e-6).floor();
    if steps < 1.0 {
        return Err(Error::data(format!("simulation window {span} s shorter than dt {dt} s")));
    }
    // Recorded leader times are relative to the segment start, which equals
    // the window start for car-following.
    Ok(Scenario {
        segment_id: seg.id.clone(),
        init: SimState { t: 0.0, x: series.position[i0], v: series.speed[i0] },
        leader,
        v_max,
        obs_speed: series.speed[i0..=i1].to_vec(),
        obs_t,
        horizon: steps * dt,
    })
}

impl Scenario {
    /// Simulated speed at each observation time. Samples after a virtual
    /// collision are predicted as standstill.
    pub fn predict(&self, p: &FvdmParams, dt: f64) -> Result<Vec<f64>> {
        let out = simulate(self.init, &self.leader, p, dt, self.horizon)?;
        let (t, v) = (&out.series.t, &out.series.speed);
        let last = t.len() - 1;
        let crashed = out.collision.is_some();
        Ok(self
            .obs_t
            .iter()
            .map(|&to| {
                let k = t.partition_point(|&x| x <= to);
                if k == 0 {
                    v[0]
                } else if k > last {
                    if crashed && to > t[last] + 1e-9 { 0.0 } else { v[last] }
                } else {
                    let w = (to - t[k - 1]) / (t[k] - t[k - 1]);
                    v[k - 1] + w * (v[k] - v[k - 1])
                }
            })
            .collect())
    }

    /// Sum of squared speed errors and sample count.
    pub fn sse(&self, p: &FvdmParams, dt: f64) -> Result<(f64, usize)> {
        let pred = self.predict(p, dt)?;
        let sse = pred.iter().zip(&self.obs_speed).map(|(a, b)| (a - b).powi(2)).sum();
        Ok((sse, pred.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProblem {
    pub segments: Vec<TrajectorySegment>,
    pub bounds: ParamBounds,
    pub optimizer: OptimizerConfig,
    /// Simulation step (s).
    pub dt: f64,
}

impl CalibrationProblem {
    pub fn new(segments: Vec<TrajectorySegment>) -> Self {
        CalibrationProblem {
            segments,
            bounds: ParamBounds::default(),
            optimizer: OptimizerConfig::default(),
            dt: DT_NOMINAL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub segment_id: String,
    pub rmse: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub group: String,
    /// `v_max` is the largest per-segment desired speed of the group.
    pub params: FvdmParams,
    /// Pooled over all samples of the group (m/s).
    pub rmse: f64,
    pub evals: usize,
    pub per_segment_rmse: Vec<SegmentFit>,
}

/// Pooled RMSE of `scenarios` under the four free parameters `x`, plus
/// per-scenario `(sse, n)`.
pub fn pooled_rmse(scenarios: &[Scenario], x: &[f64], dt: f64) -> Result<(f64, Vec<(f64, usize)>)> {
    let parts: Vec<Result<(f64, usize)>> = scenarios
        .par_iter()
        .map(|s| s.sse(&FvdmParams::new(x[0], x[1], x[2], x[3], s.v_max), dt))
        .collect();
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let (mut sse, mut n) = (0.0, 0usize);
    for &(e, k) in &parts {
        sse += e;
        n += k;
    }
    Ok(((sse / n as f64).sqrt(), parts))
}

pub fn calibrate(problem: &CalibrationProblem) -> Result<CalibrationResult> {
    problem.bounds.validate()?;
    problem.optimizer.validate()?;
    if !(problem.dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {}", problem.dt)));
    }
    let first = problem.segments.first().ok_or_else(|| Error::invalid("no segments to calibrate"))?;
    let group = calibration_group(first.behavior);
    for s in &problem.segments {
        if calibration_group(s.behavior) != group {
            return Err(Error::invalid(format!(
                "segment `{}` is in group `{}`, expected `{group}`",
                s.id,
                calibration_group(s.behavior)
            )));
        }
    }
    let scenarios = problem
        .segments
        .iter()
        .map(|s| build_scenario(s, problem.dt))
        .collect::<Result<Vec<_>>>()?;
    let dt = problem.dt;

    let best = minimize(
        |x| pooled_rmse(&scenarios, x, dt).map(|r| r.0).unwrap_or(f64::NAN),
        &problem.bounds.as_array(),
        &problem.optimizer,
    )?;
    let x = &best.x;
    let (rmse, parts) = pooled_rmse(&scenarios, x, dt)?;
    let v_max = scenarios.iter().map(|s| s.v_max).fold(0.0, f64::max);
    Ok(CalibrationResult {
        group,
        params: FvdmParams::new(x[0], x[1], x[2], x[3], v_max),
        rmse,
        evals: best.evals,
        per_segment_rmse: scenarios
            .iter()
            .zip(parts)
            .map(|(s, (e, n))| SegmentFit { segment_id: s.segment_id.clone(), rmse: (e / n as f64).sqrt(), samples: n })
            .collect(),
    })
}

/// A calibration row as reported for the field data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceFit {
    pub group: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub s0: f64,
    pub delta_s: f64,
    pub rmse: f64,
}

pub const REFERENCE_FITS: [ReferenceFit; 8] = [
    ReferenceFit { group: "stopping", alpha: 0.7510, beta: 0.8127, s0: 5.5761, delta_s: 18.9590, rmse: 1.6716 },
    ReferenceFit { group: "accelerating", alpha: 0.0926, beta: 0.0926, s0: 5.0000, delta_s: 18.8944, rmse: 1.2359 },
    ReferenceFit { group: "standard-follow-2", alpha: 0.0309, beta: 1.6770, s0: 8.8272, delta_s: 13.4895, rmse: 0.9252 },
    ReferenceFit { group: "standard-follow-4", alpha: 0.0171, beta: 3.3368, s0: 9.9108, delta_s: 19.7680, rmse: 0.9252 },
    ReferenceFit { group: "standard-follow-7", alpha: 0.0309, beta: 3.4259, s0: 9.8148, delta_s: 19.6315, rmse: 0.9252 },
    ReferenceFit { group: "intersection-follow-2", alpha: 0.0034, beta: 1.6701, s0: 6.6735, delta_s: 3.0618, rmse: 0.3591 },
    ReferenceFit { group: "intersection-follow-4", alpha: 0.0926, beta: 0.2160, s0: 4.2593, delta_s: 10.5414, rmse: 0.3322 },
    ReferenceFit { group: "intersection-follow-7", alpha: 0.0103, beta: 0.1680, s0: 9.2524, delta_s: 10.4049, rmse: 0.2514 },
];

pub fn reference_fit(group: &str) -> Option<&'static ReferenceFit> {
    REFERENCE_FITS.iter().find(|r| r.group == group)
}

impl ReferenceFit {
    pub fn params(&self, v_max: f64) -> FvdmParams {
        FvdmParams::new(self.alpha, self.beta, self.s0, self.delta_s, v_max)
    }
}
