use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_file, HarnessError};
use crate::behavior::FitOptions;
use crate::classifier::{ClassifierConfig, EvalOptions};
use crate::robosim::{ControllerSpec, SimParams, TaskGeometry};
use crate::signal::Condition;
use crate::synth::{mix_seed, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Counts {
    pub train_per_label: usize,
    pub eval_per_label: usize,
    /// Blocks per condition.
    pub blocks: usize,
}

impl Default for Counts {
    fn default() -> Self {
        Self {
            train_per_label: 100,
            eval_per_label: 200,
            blocks: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Controllers {
    pub neutral: ControllerSpec,
    pub expressive: ControllerSpec,
}

impl Default for Controllers {
    fn default() -> Self {
        Self {
            neutral: ControllerSpec::default_neutral(),
            expressive: ControllerSpec::default_expressive(),
        }
    }
}

impl Controllers {
    pub fn get(&self, condition: Condition) -> &ControllerSpec {
        match condition {
            Condition::Neu => &self.neutral,
            Condition::Exp => &self.expressive,
        }
    }
}

/// Everything a run depends on. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub counts: Counts,
    pub synth: SynthConfig,
    pub fit: FitOptions,
    pub classifier: ClassifierConfig,
    /// Distance target and filter for classification; the phase is chosen
    /// per command.
    pub eval: EvalOptions,
    pub controllers: Controllers,
    pub geometry: TaskGeometry,
    pub sim: SimParams,
    /// Human time before each trial of a block, s.
    pub inter_trial_latency: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            counts: Counts::default(),
            synth: SynthConfig::default(),
            fit: FitOptions::default(),
            classifier: ClassifierConfig::default(),
            eval: EvalOptions::default(),
            controllers: Controllers::default(),
            geometry: TaskGeometry::default(),
            sim: SimParams::default(),
            inter_trial_latency: 1.0,
            output_dir: PathBuf::from("out"),
        }
    }
}

const TRAIN_STREAM: u64 = 0x7261;
const EVAL_STREAM: u64 = 0x6576;
const SIM_STREAM: u64 = 0x7369;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = read_file(path)?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
            line: e.line() as u64,
            message: format!("{}: {e}", path.display()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg = |e: String| HarnessError::Config(e);
        self.synth.validate().map_err(|e| cfg(e.to_string()))?;
        self.classifier.validate().map_err(|e| cfg(e.to_string()))?;
        for c in [Condition::Neu, Condition::Exp] {
            let spec = self.controllers.get(c);
            spec.validate().map_err(|e| cfg(e.to_string()))?;
            if spec.condition() != c {
                return Err(cfg(format!("controllers.{}: wrong controller kind", match c {
                    Condition::Neu => "neutral",
                    Condition::Exp => "expressive",
                })));
            }
        }
        self.geometry.validate().map_err(|e| cfg(e.to_string()))?;
        self.sim.validate().map_err(|e| cfg(e.to_string()))?;
        if !(self.inter_trial_latency >= 0.0 && self.inter_trial_latency.is_finite()) {
            return Err(cfg("inter_trial_latency must be non-negative".into()));
        }
        if self.counts.train_per_label == 0 || self.counts.eval_per_label == 0 {
            return Err(cfg("trial counts must be positive".into()));
        }
        Ok(())
    }

    pub fn train_seed(&self) -> u64 {
        mix_seed(self.seed, TRAIN_STREAM, 0)
    }

    pub fn eval_seed(&self) -> u64 {
        mix_seed(self.seed, EVAL_STREAM, 0)
    }

    pub fn sim_seed(&self, block: usize) -> u64 {
        mix_seed(self.seed, SIM_STREAM, block as u64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
