use serde::{Deserialize, Serialize};

use super::{distance_series, lowpass_butter2, FilterSpec, MotionPhase, ScalarSeries, SignalError, Trajectory};

/// What the distance signal of a phase is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceTarget {
    /// Where the wrist is when the phase ends: the cup for the reach, the
    /// handover location for the carry. Averaged over the five samples
    /// centred on the phase boundary.
    #[default]
    PhaseEnd,
    /// A fixed point, m.
    Point { pos: [f64; 3] },
}

/// How the distance signal is smoothed before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamFilter {
    /// Butterworth cutoff, Hz. `None` disables filtering.
    pub cutoff_hz: Option<f64>,
    /// Forward-backward filtering for offline use; causal otherwise.
    pub zero_phase: bool,
}

impl Default for StreamFilter {
    fn default() -> Self {
        Self {
            cutoff_hz: Some(8.0),
            zero_phase: false,
        }
    }
}

impl StreamFilter {
    pub fn offline() -> Self {
        Self {
            zero_phase: true,
            ..Self::default()
        }
    }
}

/// Boundary index where `phase` ends.
fn phase_end(traj: &Trajectory, phase: MotionPhase) -> Option<usize> {
    traj.phase_range(phase).map(|r| r.end)
}

/// Resolve `target` for `phase` of `traj`.
pub fn resolve_target(traj: &Trajectory, phase: MotionPhase, target: &DistanceTarget) -> Result<[f64; 3], SignalError> {
    match target {
        DistanceTarget::Point { pos } => Ok(*pos),
        DistanceTarget::PhaseEnd => {
            let end = phase_end(traj, phase)
                .ok_or_else(|| SignalError::InvalidTrajectory("missing phase annotations".into()))?;
            let s = traj.samples();
            let lo = end.saturating_sub(2).min(s.len() - 1);
            let hi = (end + 3).min(s.len());
            let lo = lo.min(hi - 1);
            let k = (hi - lo) as f64;
            let mut p = [0.0; 3];
            for sample in &s[lo..hi] {
                for (acc, v) in p.iter_mut().zip(sample.pos) {
                    *acc += v / k;
                }
            }
            Ok(p)
        }
    }
}

/// Distance to the resolved target over the whole trial, filtered, then cut
/// to `phase`. Filtering the full trial first keeps short phases free of
/// filter start-up effects.
pub fn phase_distance(
    traj: &Trajectory,
    phase: MotionPhase,
    target: &DistanceTarget,
    filter: &StreamFilter,
) -> Result<ScalarSeries, SignalError> {
    let range = traj
        .phase_range(phase)
        .ok_or_else(|| SignalError::InvalidTrajectory("missing phase annotations".into()))?;
    let target = resolve_target(traj, phase, target)?;
    let mut dist = distance_series(traj, target);
    if let Some(cutoff) = filter.cutoff_hz {
        let fs = 1.0 / dist.uniform_dt()?;
        dist = lowpass_butter2(&dist, &FilterSpec::new(cutoff, fs)?, filter.zero_phase)?;
        // Distances stay non-negative after smoothing.
        let clipped = dist.values().iter().map(|v| v.max(0.0)).collect();
        dist = dist.with_values(clipped)?;
    }
    dist.slice(range.start, range.end)
}
