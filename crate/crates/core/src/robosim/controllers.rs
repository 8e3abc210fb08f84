use serde::{Deserialize, Serialize};

use super::{EndEffectorState, SimError, VelocityProfile};
use crate::signal::{norm3, sub3, Condition};
use crate::synth::{min_jerk, MinJerkParams};

/// Commands vanish within this distance of the target, m.
pub const ARRIVAL_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControllerSpec {
    Neutral {
        /// 1/s.
        k_p: f64,
        /// m/s.
        v_const: f64,
    },
    Expressive {
        careful: VelocityProfile,
        not_careful: VelocityProfile,
    },
}

impl ControllerSpec {
    pub fn default_neutral() -> Self {
        Self::Neutral {
            k_p: 4.0,
            v_const: 0.25,
        }
    }

    /// Min-jerk profiles: slow for full cups, brisk otherwise.
    pub fn default_expressive() -> Self {
        let mj = |distance, duration| {
            min_jerk(MinJerkParams {
                distance,
                duration,
                sample_rate_hz: 120.0,
            })
            .expect("default profile parameters are valid")
        };
        Self::Expressive {
            careful: mj(0.5, 4.5),
            not_careful: mj(0.5, 1.2),
        }
    }

    pub fn default_for(condition: Condition) -> Self {
        match condition {
            Condition::Neu => Self::default_neutral(),
            Condition::Exp => Self::default_expressive(),
        }
    }

    pub fn condition(&self) -> Condition {
        match self {
            Self::Neutral { .. } => Condition::Neu,
            Self::Expressive { .. } => Condition::Exp,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match self {
            Self::Neutral { k_p, v_const } => {
                if !(*k_p > 0.0 && *v_const > 0.0 && k_p.is_finite() && v_const.is_finite()) {
                    return Err(SimError::InvalidSpec("k_p and v_const must be positive".into()));
                }
            }
            Self::Expressive { careful, not_careful } => {
                for p in [careful, not_careful] {
                    VelocityProfile::new(p.dt(), p.values().to_vec())
                        .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
                    if !(p.displacement() > 0.0) {
                        return Err(SimError::InvalidSpec("profile without displacement".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Proportional command saturated at `v_const`, zero within 1 mm.
pub fn neutral_command(state: &EndEffectorState, target: [f64; 3], k_p: f64, v_const: f64) -> [f64; 3] {
    let err = sub3(target, state.pos);
    let dist = norm3(err);
    if dist < ARRIVAL_TOLERANCE {
        return [0.0; 3];
    }
    let speed = (k_p * dist).min(v_const);
    err.map(|e| e / dist * speed)
}

/// A straight segment replayed with a profile stretched in time so that the
/// travelled distance equals the segment length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressiveSegment {
    start: [f64; 3],
    end: [f64; 3],
    direction: [f64; 3],
    length: f64,
    profile: VelocityProfile,
}

impl ExpressiveSegment {
    pub fn new(start: [f64; 3], end: [f64; 3], profile: &VelocityProfile) -> Result<Self, SimError> {
        let d = sub3(end, start);
        let length = norm3(d);
        if !(length > 0.0) {
            return Err(SimError::ZeroLengthPath);
        }
        let profile = profile
            .rescaled_to(length)
            .map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        Ok(Self {
            start,
            end,
            direction: d.map(|v| v / length),
            length,
            profile,
        })
    }

    pub fn start(&self) -> [f64; 3] {
        self.start
    }

    pub fn end(&self) -> [f64; 3] {
        self.end
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Duration of the stretched profile, s.
    pub fn duration(&self) -> f64 {
        self.profile.duration()
    }

    pub fn profile(&self) -> &VelocityProfile {
        &self.profile
    }

    pub fn command(&self, elapsed: f64) -> [f64; 3] {
        let v = self.profile.speed_at(elapsed);
        self.direction.map(|d| d * v)
    }
}

/// Profile-driven command at `elapsed` seconds into the segment.
pub fn expressive_command(
    start: [f64; 3],
    end: [f64; 3],
    profile: &VelocityProfile,
    elapsed: f64,
) -> Result<[f64; 3], SimError> {
    Ok(ExpressiveSegment::new(start, end, profile)?.command(elapsed))
}
