//! Replay of an activation behind a constant-speed leader approaching an
//! intersection: the mode decision picks car following or a
//! permission stop, and the chosen mode is simulated.

use serde::{Deserialize, Serialize};

use crate::behavior::{decide_mode_with, Mode, ModeDecision, DEFAULT_FOLLOW_THRESHOLD_M};
use crate::calibration::reference_fit;
use crate::error::{Error, Result};
use crate::fvdm::{simulate, FvdmParams, LeaderSpec, SimState};
use crate::synth::leader_track;
use crate::trajectory::LongitudinalSeries;
use crate::units::{mph_to_mps, DT_NOMINAL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Leader distance at activation (m).
    pub activation_distance: f64,
    /// Leader cruise speed, also the follower's initial speed (m/s).
    pub leader_speed: f64,
    pub desired_speed: f64,
    /// Stop line position ahead of the follower at activation (m).
    pub stop_line_m: f64,
    pub threshold_m: f64,
    /// Whether a leader exactly at the threshold is followed.
    pub inclusive: bool,
    pub following: FvdmParams,
    pub stopping: FvdmParams,
    pub dt: f64,
    pub horizon: f64,
}

impl ThresholdConfig {
    /// 40 mph leader, 40 mph setting, intersection-following gap 7 and
    /// stopping parameters from the reference fits.
    pub fn at_distance(activation_distance: f64) -> Self {
        let v = mph_to_mps(40.0);
        let fit = |g| reference_fit(g).expect("known group").params(v);
        ThresholdConfig {
            activation_distance,
            leader_speed: v,
            desired_speed: v,
            stop_line_m: 300.0,
            threshold_m: DEFAULT_FOLLOW_THRESHOLD_M,
            inclusive: true,
            following: fit("intersection-follow-7"),
            stopping: fit("stopping"),
            dt: DT_NOMINAL,
            horizon: 120.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReplay {
    pub decision: ModeDecision,
    /// Follower kinematics; the leader track is the real leader.
    pub series: LongitudinalSeries,
    /// Leader minus follower position (m).
    pub gap_headway: Vec<f64>,
    /// Gap headway over follower speed (s); `None` at standstill.
    pub time_headway: Vec<Option<f64>>,
    pub stop_line: f64,
    pub crossed_stop_line: bool,
    pub min_speed: f64,
}

pub fn replay(cfg: &ThresholdConfig) -> Result<ThresholdReplay> {
    if !(cfg.activation_distance > 0.0) {
        return Err(Error::invalid("activation distance must be positive"));
    }
    if !(cfg.leader_speed > 0.0) || !(cfg.desired_speed > 0.0) {
        return Err(Error::invalid("speeds must be positive"));
    }
    let decision = decide_mode_with(true, cfg.activation_distance, cfg.threshold_m, cfg.inclusive);
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let leader = leader_track(&vec![cfg.leader_speed; steps + 1], cfg.activation_distance, cfg.dt);
    let init = SimState { t: 0.0, x: 0.0, v: cfg.leader_speed };
    let (spec, params) = match decision.mode {
        Mode::Following => (LeaderSpec::Recorded(leader.clone()), cfg.following.with_v_max(cfg.desired_speed)),
        Mode::PermissionStopping => {
            (LeaderSpec::VirtualStopped(cfg.stop_line_m), cfg.stopping.with_v_max(cfg.desired_speed))
        }
    };
    let out = simulate(init, &spec, &params, cfg.dt, cfg.horizon)?;
    if let Some(c) = out.collision {
        return Err(Error::Collision { t: c.t, spacing: c.spacing });
    }
    let n = out.series.len();
    let lead = crate::trajectory::LeaderTrack {
        t: leader.t[..n].to_vec(),
        position: leader.position[..n].to_vec(),
        speed: leader.speed[..n].to_vec(),
    };
    let series = LongitudinalSeries { leader: None, spacing: None, ..out.series }.with_leader(lead);
    let gap_headway = series.spacing.clone().expect("leader set");
    let time_headway = gap_headway
        .iter()
        .zip(&series.speed)
        .map(|(&g, &v)| if v > 0.0 { Some(g / v) } else { None })
        .collect();
    let min_speed = series.speed.iter().cloned().fold(f64::INFINITY, f64::min);
    let crossed = series.position.last().is_some_and(|&x| x > cfg.stop_line_m);
    Ok(ThresholdReplay {
        decision,
        series,
        gap_headway,
        time_headway,
        stop_line: cfg.stop_line_m,
        crossed_stop_line: crossed,
        min_speed,
    })
}
