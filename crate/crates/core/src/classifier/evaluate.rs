use serde::{Deserialize, Serialize};

use super::{classify_online, ClassifierConfig, ClassifierError, Decision, TraceRow};
use crate::behavior::ModelPair;
use crate::signal::{phase_distance, Cup, DistanceTarget, MotionPhase, StreamFilter, Trajectory};
use crate::synth::CarefulnessLabel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// `Reach` or `Carry`.
    pub phase: MotionPhase,
    pub target: DistanceTarget,
    pub filter: StreamFilter,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            phase: MotionPhase::Carry,
            target: DistanceTarget::PhaseEnd,
            filter: StreamFilter::default(),
        }
    }
}

/// Per-trial outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_id: String,
    pub cup: Cup,
    pub decision: Option<CarefulnessLabel>,
    pub correct: bool,
    pub decision_step: Option<usize>,
    pub decision_time: Option<f64>,
    /// Samples in the evaluated stream.
    pub stream_len: usize,
    /// Stream end minus decision time, s.
    pub lead_time: Option<f64>,
    pub final_beliefs: [f64; 2],
}

/// Statistics for trials of one true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: CarefulnessLabel,
    pub cup: Cup,
    pub n: usize,
    pub correct: usize,
    pub wrong: usize,
    pub undecided: usize,
    pub accuracy: f64,
    /// Nearest-rank 97th percentile of the decision step over correct trials.
    pub p97_decision_step: Option<usize>,
    pub mean_decision_step: Option<f64>,
    /// Fraction of correct trials decided at least 0.4 s before stream end.
    pub early_fraction: Option<f64>,
    /// Fraction of the label's trials correctly decided by each step.
    pub decided_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub fraction: f64,
    /// Binomial standard error, sqrt(p(1 − p)/n).
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub phase: MotionPhase,
    pub config: ClassifierConfig,
    pub n_trials: usize,
    /// Not careful (empty cups) first, then careful (full cups).
    pub labels: Vec<LabelStats>,
    pub trials: Vec<TrialOutcome>,
}

impl EvalReport {
    pub fn label(&self, label: CarefulnessLabel) -> &LabelStats {
        &self.labels[label.index()]
    }
}

/// Lead time required for a decision to count as early, s.
pub const EARLY_LEAD: f64 = 0.4;

/// Nearest-rank percentile: the value at rank ⌈p/100 · n⌉ of the sorted data.
pub fn nearest_rank(values: &[usize], pct: f64) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = ((pct / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

fn outcome(traj: &Trajectory, decision: &Decision, stream_end: f64, stream_len: usize) -> TrialOutcome {
    let cup = traj.meta().cup;
    let truth = CarefulnessLabel::from(cup);
    TrialOutcome {
        trial_id: traj.meta().trial_id.clone(),
        cup,
        decision: decision.label,
        correct: decision.label == Some(truth),
        decision_step: decision.step_index,
        decision_time: decision.time,
        stream_len,
        lead_time: decision.time.map(|t| stream_end - t),
        final_beliefs: decision.final_beliefs.b,
    }
}

fn label_stats(label: CarefulnessLabel, trials: &[TrialOutcome]) -> LabelStats {
    let mine: Vec<&TrialOutcome> = trials
        .iter()
        .filter(|t| CarefulnessLabel::from(t.cup) == label)
        .collect();
    let n = mine.len();
    let correct: Vec<&TrialOutcome> = mine.iter().copied().filter(|t| t.correct).collect();
    let undecided = mine.iter().filter(|t| t.decision.is_none()).count();
    let steps: Vec<usize> = correct.iter().filter_map(|t| t.decision_step).collect();
    let max_len = mine.iter().map(|t| t.stream_len).max().unwrap_or(0);
    let decided_curve = (0..max_len)
        .map(|step| {
            let k = steps.iter().filter(|s| **s <= step).count();
            let p = if n > 0 { k as f64 / n as f64 } else { 0.0 };
            CurvePoint {
                step,
                fraction: p,
                std_err: if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { 0.0 },
            }
        })
        .collect();
    let early = correct
        .iter()
        .filter(|t| t.lead_time.is_some_and(|l| l >= EARLY_LEAD - 1e-9))
        .count();
    LabelStats {
        label,
        cup: label.cup(),
        n,
        correct: correct.len(),
        wrong: n - correct.len() - undecided,
        undecided,
        accuracy: if n > 0 { correct.len() as f64 / n as f64 } else { 0.0 },
        p97_decision_step: nearest_rank(&steps, 97.0),
        mean_decision_step: (!steps.is_empty()).then(|| steps.iter().sum::<usize>() as f64 / steps.len() as f64),
        early_fraction: (!correct.is_empty()).then(|| early as f64 / correct.len() as f64),
        decided_curve,
    }
}

/// Classify the chosen phase of every trial and aggregate per true label.
/// Trials are processed in trial-id order.
pub fn evaluate(
    dataset: &[Trajectory],
    models: &ModelPair,
    cfg: &ClassifierConfig,
    opts: &EvalOptions,
) -> Result<EvalReport, ClassifierError> {
    evaluate_traced(dataset, models, cfg, opts).map(|(r, _)| r)
}

/// Like [`evaluate`], also returning each trial's belief trace in report
/// order.
pub fn evaluate_traced(
    dataset: &[Trajectory],
    models: &ModelPair,
    cfg: &ClassifierConfig,
    opts: &EvalOptions,
) -> Result<(EvalReport, Vec<Vec<TraceRow>>), ClassifierError> {
    if dataset.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    cfg.validate()?;
    let mut order: Vec<&Trajectory> = dataset.iter().collect();
    order.sort_by(|a, b| a.meta().trial_id.cmp(&b.meta().trial_id));
    let mut trials = Vec::with_capacity(order.len());
    let mut traces = Vec::with_capacity(order.len());
    for traj in order {
        let wrap = |source| ClassifierError::Trial {
            trial: traj.meta().trial_id.clone(),
            source,
        };
        let dist = phase_distance(traj, opts.phase, &opts.target, &opts.filter).map_err(wrap)?;
        let decision = classify_online(&dist, models, cfg)?;
        let end = dist.t()[dist.len() - 1];
        trials.push(outcome(traj, &decision, end, dist.len()));
        traces.push(decision.trace);
    }
    let labels = CarefulnessLabel::ALL
        .into_iter()
        .map(|l| label_stats(l, &trials))
        .collect();
    let report = EvalReport {
        phase: opts.phase,
        config: *cfg,
        n_trials: trials.len(),
        labels,
        trials,
    };
    Ok((report, traces))
}
