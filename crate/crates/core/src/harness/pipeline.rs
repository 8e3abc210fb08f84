use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{save_trials, write_file, write_report, HarnessError, ReportInputs, RunConfig};
use crate::behavior::{fit_pair, save_model, ModelPair};
use crate::classifier::{evaluate_traced, write_trace_csv, EvalOptions, EvalReport, TraceRow};
use crate::robosim::{run_block, AttachedClassifier, BlockMetrics, BlockTrial};
use crate::signal::{Condition, Cup, MotionPhase, StreamFilter, Trajectory};
use crate::synth::{mix_seed, synth_dataset, synth_trial, CarefulnessLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

pub fn synth_split(cfg: &RunConfig, split: Split) -> Result<Vec<Trajectory>, HarnessError> {
    let (n, seed) = match split {
        Split::Train => (cfg.counts.train_per_label, cfg.train_seed()),
        Split::Eval => (cfg.counts.eval_per_label, cfg.eval_seed()),
    };
    Ok(synth_dataset(n, &cfg.synth, seed)?)
}

pub fn run_fit(trials: &[Trajectory], cfg: &RunConfig) -> Result<ModelPair, HarnessError> {
    Ok(fit_pair(trials, &cfg.fit)?)
}

pub fn run_classify(
    trials: &[Trajectory],
    models: &ModelPair,
    cfg: &RunConfig,
    phase: MotionPhase,
) -> Result<(EvalReport, Vec<Vec<TraceRow>>), HarnessError> {
    let opts = EvalOptions {
        phase,
        ..cfg.eval.clone()
    };
    Ok(evaluate_traced(trials, models, &cfg.classifier, &opts)?)
}

/// Write `report.json` and, if traces are given, one belief-trace CSV per
/// trial under `traces/`.
pub fn write_eval(report: &EvalReport, traces: Option<&[Vec<TraceRow>]>, dir: &Path) -> Result<(), HarnessError> {
    write_file(&dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    if let Some(traces) = traces {
        for (trial, rows) in report.trials.iter().zip(traces) {
            let mut buf = Vec::new();
            write_trace_csv(rows, &mut buf)?;
            write_file(&dir.join("traces").join(format!("{}.csv", trial.trial_id)), buf)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimBlock {
    pub block: usize,
    pub metrics: BlockMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    /// Block index order, neutral before expressive.
    pub blocks: Vec<SimBlock>,
}

/// The four human trials of block `block`: a shuffled balanced cup order,
/// and per trial a handover location drawn from the zone with a synthetic
/// wrist motion ending there. Independent of the condition.
pub fn block_plan(cfg: &RunConfig, block: usize) -> Result<Vec<BlockTrial>, HarnessError> {
    let seed = cfg.sim_seed(block);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cups = [Cup::Empty, Cup::Empty, Cup::Full, Cup::Full];
    cups.shuffle(&mut rng);
    let mut out = Vec::with_capacity(cups.len());
    for (i, cup) in cups.into_iter().enumerate() {
        let center = cfg.geometry.sample_handover(&mut rng);
        let mut synth = cfg.synth.clone();
        synth.geometry.handover = center;
        let mut human = synth_trial(CarefulnessLabel::from(cup), &synth, mix_seed(seed, 1, i as u64))?;
        human.meta_mut().trial_id = format!("block{block:02}-{i}-{cup}");
        out.push(BlockTrial {
            human,
            geometry: cfg.geometry.with_handover(center),
        });
    }
    Ok(out)
}

/// Run every block under both conditions with identical human trials. With
/// models, a classifier listens to each handover.
pub fn run_simulation(cfg: &RunConfig, models: Option<&ModelPair>) -> Result<SimReport, HarnessError> {
    let listener = models.map(|m| AttachedClassifier {
        models: m,
        config: cfg.classifier,
        filter: StreamFilter {
            zero_phase: false,
            ..cfg.eval.filter
        },
    });
    let mut blocks = Vec::with_capacity(2 * cfg.counts.blocks);
    for b in 0..cfg.counts.blocks {
        let plan = block_plan(cfg, b)?;
        for condition in [Condition::Neu, Condition::Exp] {
            let trials: Vec<BlockTrial> = plan
                .iter()
                .cloned()
                .map(|mut t| {
                    t.human.meta_mut().condition = condition;
                    t
                })
                .collect();
            let metrics = run_block(
                &trials,
                condition,
                cfg.controllers.get(condition),
                &cfg.sim,
                cfg.inter_trial_latency,
                listener.as_ref(),
            )?;
            blocks.push(SimBlock { block: b, metrics });
        }
    }
    Ok(SimReport { seed: cfg.seed, blocks })
}

/// Per-trial simulation rows as CSV.
pub fn write_sim_trials_csv(sim: &SimReport) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "block",
        "condition",
        "trial_id",
        "cup",
        "handover_s",
        "busy_s",
        "spill",
        "max_full_accel",
        "decision",
    ])?;
    for b in &sim.blocks {
        for t in &b.metrics.trials {
            let decision = t
                .decision
                .as_ref()
                .and_then(|d| d.label)
                .map(|l| l.as_str())
                .unwrap_or("");
            w.write_record([
                b.block.to_string(),
                t.condition.to_string(),
                t.trial_id.clone(),
                t.cup.to_string(),
                format!("{:?}", t.handover_time),
                format!("{:?}", t.robot_busy_time),
                t.spill.to_string(),
                format!("{:?}", t.max_full_accel),
                decision.to_string(),
            ])?;
        }
    }
    w.into_inner().map_err(|e| HarnessError::Input(e.to_string()))
}

/// Files written by [`run_pipeline`], relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelinePaths {
    pub root: PathBuf,
}

impl PipelinePaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }
    pub fn train(&self) -> PathBuf {
        self.root.join("train.csv")
    }
    pub fn eval(&self) -> PathBuf {
        self.root.join("eval.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.root.join("model.txt")
    }
    pub fn classify(&self, phase: MotionPhase) -> PathBuf {
        self.root.join(format!("classify-{phase}"))
    }
    pub fn simulate(&self) -> PathBuf {
        self.root.join("simulate.json")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

/// synth → fit → classify (carry and reach) → simulate → report.
pub fn run_pipeline(cfg: &RunConfig, root: &Path) -> Result<PipelinePaths, HarnessError> {
    cfg.validate()?;
    let paths = PipelinePaths::new(root);
    write_file(&paths.config(), cfg.to_json() + "\n")?;
    let train = synth_split(cfg, Split::Train)?;
    let eval = synth_split(cfg, Split::Eval)?;
    std::fs::create_dir_all(root).map_err(|e| HarnessError::io(root, e))?;
    save_trials(&train, paths.train())?;
    save_trials(&eval, paths.eval())?;
    let models = run_fit(&train, cfg)?;
    save_model(&models, paths.model())?;
    let (carry, traces) = run_classify(&eval, &models, cfg, MotionPhase::Carry)?;
    write_eval(&carry, Some(&traces), &paths.classify(MotionPhase::Carry))?;
    let (reach, _) = run_classify(&eval, &models, cfg, MotionPhase::Reach)?;
    write_eval(&reach, None, &paths.classify(MotionPhase::Reach))?;
    let sim = run_simulation(cfg, Some(&models))?;
    write_file(&paths.simulate(), serde_json::to_string_pretty(&sim)? + "\n")?;
    write_file(&root.join("simulate_trials.csv"), write_sim_trials_csv(&sim)?)?;
    let inputs = ReportInputs {
        train: &train,
        eval: &eval,
        fit: &cfg.fit,
        models: &models,
        carry: &carry,
        reach: Some(&reach),
        sim: &sim,
    };
    write_report(&inputs, &paths.report())?;
    Ok(paths)
}
