//! Kinematic simulation of the receiving robot.
//!
//! The arm is a Cartesian point under velocity control at 40 Hz. Time is
//! counted in integer ticks of a 120 Hz base clock (one human sample per
//! tick, one robot step every three), so durations add up exactly.

mod controllers;
mod profile;
mod trial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::ClassifierError;
use crate::signal::{norm3, sub3, Cup, SignalError};

pub use controllers::{expressive_command, neutral_command, ControllerSpec, ExpressiveSegment, ARRIVAL_TOLERANCE};
pub use profile::{ProfileError, VelocityProfile, REST_TOLERANCE};
pub use trial::{
    net_human_ticks, run_block, run_trial, AttachedClassifier, BlockMetrics, BlockTrial, DecisionSummary,
    RobotPhase, TaskGeometry, TraceSample, TrialMetrics, TrialRun, BLOCK_SIZE,
};

/// Base clock rate, Hz.
pub const BASE_RATE_HZ: f64 = 120.0;
/// Base ticks per robot control step.
pub const ROBOT_TICK_DIVIDER: u64 = 3;
/// Robot control period, s.
pub const ROBOT_DT: f64 = ROBOT_TICK_DIVIDER as f64 / BASE_RATE_HZ;

/// Convert base ticks to seconds.
pub fn ticks_to_secs(ticks: u64) -> f64 {
    ticks as f64 / BASE_RATE_HZ
}

/// Whole base ticks covering `secs`, rounded up.
pub fn secs_to_ticks(secs: f64) -> u64 {
    (secs * BASE_RATE_HZ - 1e-9).ceil().max(0.0) as u64
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid controller spec: {0}")]
    InvalidSpec(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("zero-length path")]
    ZeroLengthPath,
    #[error("trial {trial}: wrist never came within {trigger} m of the gripper in {timeout} s")]
    Timeout { trial: String, trigger: f64, timeout: f64 },
    #[error("trial {trial}: robot did not finish within {limit} s")]
    RobotStalled { trial: String, limit: f64 },
    #[error("controller is for {spec}, trial asks for {trial}")]
    ConditionMismatch { spec: String, trial: String },
    #[error("block needs 4 cups with 2 empty and 2 full, got {0}")]
    UnbalancedBlock(String),
    #[error("robot segments exceed the block duration")]
    InconsistentLog,
    #[error("human trajectory: {0}")]
    Human(#[from] SignalError),
    #[error("attached classifier: {0}")]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndEffectorState {
    /// m.
    pub pos: [f64; 3],
    /// m/s.
    pub vel: [f64; 3],
    /// s.
    pub t: f64,
    pub holding: Option<Cup>,
}

impl EndEffectorState {
    pub fn at_rest(pos: [f64; 3]) -> Self {
        Self {
            pos,
            vel: [0.0; 3],
            t: 0.0,
            holding: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    /// Hardware speed cap, m/s.
    pub speed_cap: f64,
    /// Spill threshold on the acceleration norm, m/s².
    pub spill_accel: f64,
    /// Max wait for the human to reach the gripper, s.
    pub timeout: f64,
    /// Rate at which the neutral controller may raise its speed, m/s².
    pub neutral_ramp: f64,
    /// Time to close the gripper, s.
    pub grasp_time: f64,
    /// Time to open the gripper, s.
    pub release_time: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            speed_cap: 1.5,
            spill_accel: 2.5,
            timeout: 10.0,
            neutral_ramp: 1.0,
            grasp_time: 0.25,
            release_time: 0.25,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !(pos(self.speed_cap) && pos(self.spill_accel) && pos(self.timeout) && pos(self.neutral_ramp)) {
            return Err(SimError::InvalidParams(
                "speed cap, spill threshold, timeout and ramp must be positive".into(),
            ));
        }
        if !(nonneg(self.grasp_time) && nonneg(self.release_time)) {
            return Err(SimError::InvalidParams("gripper times must be non-negative".into()));
        }
        Ok(())
    }
}

/// Explicit Euler step with the command capped at `cap`.
pub fn step_end_effector(state: &EndEffectorState, cmd: [f64; 3], dt: f64, cap: f64) -> EndEffectorState {
    let speed = norm3(cmd);
    let vel = if speed > cap { cmd.map(|c| c / speed * cap) } else { cmd };
    let mut pos = state.pos;
    for (p, v) in pos.iter_mut().zip(vel) {
        *p += v * dt;
    }
    EndEffectorState {
        pos,
        vel,
        t: state.t + dt,
        holding: state.holding,
    }
}

/// Largest finite-difference acceleration norm over steps that end while a
/// full cup is held.
pub fn max_full_cup_accel(trace: &[EndEffectorState]) -> f64 {
    trace
        .windows(2)
        .filter(|w| w[1].holding == Some(Cup::Full))
        .map(|w| norm3(sub3(w[1].vel, w[0].vel)) / (w[1].t - w[0].t))
        .fold(0.0, f64::max)
}

/// Spill iff the acceleration norm exceeds `a_max` at any step while the
/// full cup is held.
pub fn check_spill(trace: &[EndEffectorState], a_max: f64) -> bool {
    max_full_cup_accel(trace) > a_max
}
