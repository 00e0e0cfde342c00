//! Full Velocity Difference Model.
//!
//! ```text
//! dv/dt = alpha * (V(s) - v) + beta * (v_lead - v)
//! V(s)  = v_max * tanh((s - s0) / delta_s)
//! s     = x_lead - x
//! ```
//!
//! Stopping is modelled as following a stationary leader at the stop line,
//! free acceleration as following a leader infinitely far ahead moving at
//! `v_max`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::trajectory::LeaderTrack;
use crate::trajectory::{LongitudinalSeries, Source};

/// Multiple of `delta_s` past `s0` that stands in for an infinite gap.
/// `tanh(20)` equals 1 to double precision.
pub const FREE_SPACING_FACTOR: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FvdmParams {
    /// Sensitivity to the optimal-speed deviation (1/s).
    pub alpha: f64,
    /// Sensitivity to the speed difference (1/s).
    pub beta: f64,
    /// Minimum desired spacing (m).
    pub s0: f64,
    /// Sensitivity spacing (m).
    pub delta_s: f64,
    /// Maximum desired speed (m/s).
    pub v_max: f64,
}

impl FvdmParams {
    pub fn new(alpha: f64, beta: f64, s0: f64, delta_s: f64, v_max: f64) -> Self {
        FvdmParams { alpha, beta, s0, delta_s, v_max }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.s0, self.delta_s, self.v_max];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite FVDM parameter in {self:?}")));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.s0 < 0.0 {
            return Err(Error::invalid(format!("alpha, beta and s0 must be non-negative in {self:?}")));
        }
        if !(self.delta_s > 0.0) {
            return Err(Error::invalid(format!("delta_s must be positive, got {}", self.delta_s)));
        }
        if !(self.v_max > 0.0) {
            return Err(Error::invalid(format!("v_max must be positive, got {}", self.v_max)));
        }
        Ok(())
    }

    /// Spacing used for a leader at infinity.
    pub fn free_spacing(&self) -> f64 {
        self.s0 + FREE_SPACING_FACTOR * self.delta_s
    }

    /// Steady-state spacing behind a leader cruising at `u < v_max`.
    pub fn equilibrium_spacing(&self, u: f64) -> f64 {
        self.s0 + self.delta_s * (u / self.v_max).atanh()
    }

    pub fn with_v_max(self, v_max: f64) -> Self {
        FvdmParams { v_max, ..self }
    }
}

/// Optimal velocity `v_max * tanh((s - s0) / delta_s)`. Not clamped: negative
/// below `s0`.
pub fn optimal_velocity(s: f64, p: &FvdmParams) -> f64 {
    p.v_max * ((s - p.s0) / p.delta_s).tanh()
}

pub fn acceleration(v: f64, v_lead: f64, s: f64, p: &FvdmParams) -> f64 {
    p.alpha * (optimal_velocity(s, p) - v) + p.beta * (v_lead - v)
}

/// What the follower reacts to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeaderSpec {
    /// A measured leader on the follower's axis.
    Recorded(LeaderTrack),
    /// A stationary leader at the stop line (m on the follower's axis).
    VirtualStopped(f64),
    /// A leader infinitely far ahead at `v_max`.
    VirtualFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub series: LongitudinalSeries,
    /// Set when spacing reached zero; the series ends at that sample.
    pub collision: Option<CollisionEvent>,
}

impl SimOutcome {
    pub fn final_state(&self) -> SimState {
        let s = &self.series;
        let n = s.len() - 1;
        SimState { t: s.t[n], x: s.position[n], v: s.speed[n] }
    }
}

/// Forward simulation with semi-implicit Euler:
/// `v' = max(0, v + a dt)`, `x' = x + v' dt`.
///
/// Produces `round(horizon / dt) + 1` samples at `init.t + k dt`, unless the
/// spacing reaches zero, in which case the run stops at that sample and
/// reports the collision.
pub fn simulate(
    init: SimState,
    leader: &LeaderSpec,
    p: &FvdmParams,
    dt: f64,
    horizon: f64,
) -> Result<SimOutcome> {
    p.validate()?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt * (1.0 - 1e-9)) || !horizon.is_finite() {
        return Err(Error::invalid(format!("horizon {horizon} s shorter than dt {dt} s")));
    }
    if !(init.v >= 0.0) {
        return Err(Error::invalid(format!("initial speed {} is negative", init.v)));
    }
    let steps = (horizon / dt).round() as usize;
    let t_end = init.t + steps as f64 * dt;
    match leader {
        LeaderSpec::Recorded(track) => {
            let tol = 1e-6 * dt.max(1.0);
            if track.t.is_empty() || track.t[0] > init.t + tol || track.end_time() < t_end - tol {
                return Err(Error::LeaderTooShort { leader_end: track.end_time(), needed: t_end });
            }
        }
        LeaderSpec::VirtualStopped(x_stop) => {
            if !(*x_stop > init.x) {
                return Err(Error::invalid(format!(
                    "stop line {x_stop} m is not ahead of the initial position {} m",
                    init.x
                )));
            }
        }
        LeaderSpec::VirtualFree => {}
    }

    let cap = steps + 1;
    let mut t_out = Vec::with_capacity(cap);
    let mut x_out = Vec::with_capacity(cap);
    let mut v_out = Vec::with_capacity(cap);
    let mut a_out = Vec::with_capacity(cap);
    let mut lead_x = Vec::with_capacity(cap);
    let mut lead_v = Vec::with_capacity(cap);
    let mut collision = None;

    let (mut x, mut v) = (init.x, init.v);
    for k in 0..=steps {
        let t = init.t + k as f64 * dt;
        let (s, v_lead, lx) = match leader {
            LeaderSpec::Recorded(track) => {
                let (lx, lv) = track.sample(t).expect("coverage checked");
                (lx - x, lv, lx)
            }
            LeaderSpec::VirtualStopped(x_stop) => (x_stop - x, 0.0, *x_stop),
            LeaderSpec::VirtualFree => (p.free_spacing(), p.v_max, f64::INFINITY),
        };
        let a = acceleration(v, v_lead, s, p);
        t_out.push(t);
        x_out.push(x);
        v_out.push(v);
        a_out.push(a);
        lead_x.push(lx);
        lead_v.push(v_lead);
        if s <= 0.0 {
            collision = Some(CollisionEvent { t, spacing: s });
            break;
        }
        if k == steps {
            break;
        }
        v = (v + a * dt).max(0.0);
        x += v * dt;
    }

    let jerk = crate::trajectory::derivative_any_len(&a_out, dt);
    let mut series = LongitudinalSeries {
        t: t_out.clone(),
        position: x_out,
        speed: v_out,
        accel: a_out,
        jerk,
        leader: None,
        spacing: None,
        source: Source::Raw,
    };
    if !matches!(leader, LeaderSpec::VirtualFree) {
        series = series.with_leader(LeaderTrack { t: t_out, position: lead_x, speed: lead_v });
    }
    Ok(SimOutcome { series, collision })
}
