//! Online carefulness classification of handover motions and a kinematic
//! simulator for the receiving robot.
//!
//! Wrist trajectories ([`signal`], [`synth`]) become distance streams; two
//! Gaussian behavior models ([`behavior`]) summarize them as characteristic
//! slopes, and a belief system ([`classifier`]) decides between them online.
//! [`robosim`] replays handovers against neutral and expressive robot
//! controllers and [`harness`] ties it together behind a CLI.

pub mod behavior;
pub mod classifier;
pub mod harness;
pub mod robosim;
pub mod signal;
pub mod synth;

pub use behavior::{fit_pair, BehaviorModel, ModelPair};
pub use classifier::{classify_online, BeliefState, ClassifierConfig, Decision, OnlineClassifier};
pub use signal::{Condition, Cup, MotionPhase, Trajectory};
pub use synth::{CarefulnessLabel, SynthConfig};
