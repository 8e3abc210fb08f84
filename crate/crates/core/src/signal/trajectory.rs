use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{nominal_period, ScalarSeries, SignalError};

/// One wrist position sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds.
    pub t: f64,
    /// Meters.
    pub pos: [f64; 3],
}

impl Sample {
    pub fn new(t: f64, pos: [f64; 3]) -> Self {
        Self { t, pos }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Cup {
    #[default]
    Empty,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    #[default]
    Neu,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionPhase {
    Pre,
    Reach,
    Carry,
    Handover,
}

impl MotionPhase {
    pub const ALL: [MotionPhase; 4] = [Self::Pre, Self::Reach, Self::Carry, Self::Handover];
}

macro_rules! text_enum {
    ($ty:ty, $what:literal, $($variant:path => $text:literal),+) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self {
                    $($variant => $text,)+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($text => Ok($variant),)+
                    other => Err(format!("unknown {} '{}'", $what, other)),
                }
            }
        }
    };
}

text_enum!(Cup, "cup", Cup::Empty => "empty", Cup::Full => "full");
text_enum!(Condition, "condition", Condition::Neu => "neu", Condition::Exp => "exp");
text_enum!(
    MotionPhase, "phase",
    MotionPhase::Pre => "pre",
    MotionPhase::Reach => "reach",
    MotionPhase::Carry => "carry",
    MotionPhase::Handover => "handover"
);

/// Phase boundaries as sample indices. Pre is `[0, reach)`, reach is
/// `[reach, grasp)`, carry is `[grasp, handover)` and the handover hold is
/// `[handover, len)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseMarks {
    pub reach: usize,
    pub grasp: usize,
    pub handover: usize,
}

impl PhaseMarks {
    /// Index range of `phase` in a trajectory of `len` samples.
    pub fn range(&self, phase: MotionPhase, len: usize) -> std::ops::Range<usize> {
        match phase {
            MotionPhase::Pre => 0..self.reach,
            MotionPhase::Reach => self.reach..self.grasp,
            MotionPhase::Carry => self.grasp..self.handover,
            MotionPhase::Handover => self.handover..len,
        }
    }

    pub fn phase_of(&self, index: usize) -> MotionPhase {
        if index < self.reach {
            MotionPhase::Pre
        } else if index < self.grasp {
            MotionPhase::Reach
        } else if index < self.handover {
            MotionPhase::Carry
        } else {
            MotionPhase::Handover
        }
    }

    /// Rebuild marks from per-sample labels; labels must appear in phase
    /// order without interleaving.
    pub fn from_labels(labels: &[MotionPhase]) -> Result<Self, String> {
        for w in labels.windows(2) {
            if w[1] < w[0] {
                return Err(format!("phase '{}' follows '{}'", w[1], w[0]));
            }
        }
        let first = |p: MotionPhase| labels.iter().position(|l| *l >= p).unwrap_or(labels.len());
        Ok(Self {
            reach: first(MotionPhase::Reach),
            grasp: first(MotionPhase::Carry),
            handover: first(MotionPhase::Handover),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialMeta {
    pub trial_id: String,
    pub cup: Cup,
    pub condition: Condition,
    pub phases: Option<PhaseMarks>,
}

/// Validated wrist trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
    meta: TrialMeta,
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>, meta: TrialMeta) -> Result<Self, SignalError> {
        let invalid = |m: String| Err(SignalError::InvalidTrajectory(m));
        if samples.len() < 2 {
            return invalid(format!("{} samples, need at least 2", samples.len()));
        }
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || s.pos.iter().any(|p| !p.is_finite()) {
                return invalid(format!("non-finite sample at index {i}"));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return invalid(format!("time does not increase at index {i}"));
            }
        }
        let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
        if let Err(e) = nominal_period(&t) {
            return invalid(e.to_string());
        }
        if let Some(m) = meta.phases {
            if !(m.reach <= m.grasp && m.grasp <= m.handover && m.handover <= samples.len()) {
                return invalid(format!("phase marks {m:?} out of order"));
            }
        }
        Ok(Self { samples, meta })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn meta(&self) -> &TrialMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut TrialMeta {
        &mut self.meta
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples[self.samples.len() - 1].t - self.samples[0].t
    }

    pub fn phase_range(&self, phase: MotionPhase) -> Option<std::ops::Range<usize>> {
        self.meta.phases.map(|m| m.range(phase, self.samples.len()))
    }

    /// Per-sample phase labels, if annotated.
    pub fn phase_labels(&self) -> Option<Vec<MotionPhase>> {
        self.meta
            .phases
            .map(|m| (0..self.samples.len()).map(|i| m.phase_of(i)).collect())
    }

    /// Speed norm by central differences of position (one-sided at the ends).
    pub fn speed(&self) -> ScalarSeries {
        let s = &self.samples;
        let n = s.len();
        let rate = |a: &Sample, b: &Sample| super::norm3(super::sub3(b.pos, a.pos)) / (b.t - a.t);
        let v = (0..n)
            .map(|i| match i {
                0 => rate(&s[0], &s[1]),
                i if i == n - 1 => rate(&s[n - 2], &s[n - 1]),
                i => rate(&s[i - 1], &s[i + 1]),
            })
            .collect();
        ScalarSeries::new(s.iter().map(|x| x.t).collect(), v)
            .expect("trajectory invariants guarantee a valid series")
    }
}
