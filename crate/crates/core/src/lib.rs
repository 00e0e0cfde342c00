//! Trajectory processing and car-following model calibration for ADAS
//! interaction with traffic lights and stop signs.
//!
//! The pipeline runs in stages:
//!
//! 1. [`trajectory`]: parse GPS segments, fill short gaps, smooth, and project
//!    onto a longitudinal axis.
//! 2. [`quality`]: anomaly acceleration / jerk percentages and per-behavior
//!    summaries.
//! 3. [`fvdm`]: Full Velocity Difference Model dynamics and forward simulation
//!    against a recorded or virtual leader.
//! 4. [`direct`]: the DIRECT global optimizer.
//! 5. [`calibration`]: fit model parameters per behavior group by minimizing
//!    speed RMSE.
//! 6. [`behavior`]: behavior labels, annotations, reaction delays and the
//!    car-following threshold decision.
//! 7. [`threshold`]: replay of the lead-distance mode decision.
//! 8. [`synth`] and [`report`]: synthetic fixtures and tabular output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod behavior;
pub mod calibration;
pub mod direct;
pub mod error;
pub mod fvdm;
pub mod quality;
pub mod report;
pub mod synth;
pub mod threshold;
pub mod trajectory;
pub mod units;

pub use behavior::{AnnotationRecord, BehaviorCategory, BehaviorLabel, Mode, ModeDecision};
pub use calibration::{CalibrationProblem, CalibrationResult, ParamBounds};
pub use direct::{HyperRect, Minimum, OptimizerConfig};
pub use error::{Error, Result};
pub use fvdm::{FvdmParams, LeaderSpec, LeaderTrack, SimOutcome, SimState};
pub use quality::QualityReport;
pub use trajectory::{LongitudinalSeries, TrajectoryPoint, TrajectorySegment};
