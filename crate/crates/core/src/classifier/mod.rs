//! Online carefulness detection with a two-hypothesis belief system.
//!
//! Each new distance sample yields a slope observation X = Δẋ/Δx. The
//! prediction error against the belief-weighted model slopes drives the
//! beliefs; a label is emitted the first time either belief reaches the
//! decision threshold.

mod evaluate;

pub use evaluate::{
    evaluate, evaluate_traced, nearest_rank, CurvePoint, EvalOptions, EvalReport, LabelStats, TrialOutcome, EARLY_LEAD,
};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::behavior::ModelPair;
use crate::signal::{ScalarSeries, SignalError};
use crate::synth::CarefulnessLabel;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("invalid classifier config: {0}")]
    InvalidConfig(String),
    #[error("stream too short: {0} samples, need at least 2")]
    ShortStream(usize),
    #[error("stream period {found} s does not match configured dt {expected} s")]
    RateMismatch { found: f64, expected: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: String,
        #[source]
        source: SignalError,
    },
    #[error("empty evaluation dataset")]
    EmptyDataset,
    #[error("trace export: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// ḃᵢ = ε(e·Yᵢ + (bᵢ − ½)Yᵢ²)
    #[default]
    ErrorProjected,
    /// ḃᵢ = ε(e + (bᵢ − ½)Yᵢ²)
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Gain ε.
    pub epsilon: f64,
    /// Integration step, s. Must match the stream's sample period.
    pub dt: f64,
    pub decision_threshold: f64,
    /// |X| is clipped to this, 1/s.
    pub slope_clip: f64,
    /// Samples with |Δx| below this are skipped, m.
    pub dx_floor: f64,
    pub update_rule: UpdateRule,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.14,
            dt: 1.0 / 120.0,
            decision_threshold: 0.99,
            slope_clip: 50.0,
            dx_floor: 1e-4,
            update_rule: UpdateRule::ErrorProjected,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidConfig(m.into()));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.decision_threshold > 0.5 && self.decision_threshold <= 1.0) {
            return bad("decision threshold must lie in (0.5, 1]");
        }
        if !(self.slope_clip > 0.0) || !(self.dx_floor >= 0.0) {
            return bad("slope clip must be positive and dx floor non-negative");
        }
        Ok(())
    }
}

/// [b₁, b₂]: not careful, careful.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub b: [f64; 2],
}

impl Default for BeliefState {
    fn default() -> Self {
        Self { b: [0.5, 0.5] }
    }
}

impl BeliefState {
    pub fn new(b1: f64) -> Self {
        Self { b: [b1, 1.0 - b1] }
    }

    /// Label whose belief has reached `threshold`, if any.
    pub fn leader(&self, threshold: f64) -> Option<CarefulnessLabel> {
        CarefulnessLabel::ALL
            .into_iter()
            .find(|l| self.b[l.index()] >= threshold)
    }
}

/// Result of [`slope_observation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Slope(f64),
    Skip,
}

impl Observation {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Slope(x) => Some(x),
            Self::Skip => None,
        }
    }
}

/// X = Δẋ/Δx, clipped; `Skip` when |Δx| is below the floor.
pub fn slope_observation(x_prev: f64, x_cur: f64, xdot_prev: f64, xdot_cur: f64, cfg: &ClassifierConfig) -> Observation {
    let dx = x_cur - x_prev;
    if !(dx.abs() >= cfg.dx_floor) || dx == 0.0 {
        return Observation::Skip;
    }
    let x = (xdot_cur - xdot_prev) / dx;
    Observation::Slope(x.clamp(-cfg.slope_clip, cfg.slope_clip))
}

/// Intermediate values of one belief update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDetail {
    pub error: f64,
    pub rates: [f64; 2],
    /// Beliefs after the Euler step, before clamping and normalization.
    pub raw: [f64; 2],
    pub belief: BeliefState,
}

pub fn belief_step_detail(b: BeliefState, x: f64, models: &ModelPair, cfg: &ClassifierConfig) -> StepDetail {
    let y = models.slopes();
    let error = x - (b.b[0] * y[0] + b.b[1] * y[1]);
    let mut rates = [0.0; 2];
    let mut raw = [0.0; 2];
    for i in 0..2 {
        let drive = match cfg.update_rule {
            UpdateRule::ErrorProjected => error * y[i],
            UpdateRule::PaperLiteral => error,
        };
        rates[i] = cfg.epsilon * (drive + (b.b[i] - 0.5) * y[i] * y[i]);
        raw[i] = b.b[i] + rates[i] * cfg.dt;
    }
    let clamped = raw.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
    let sum = clamped[0] + clamped[1];
    // Both beliefs driven to zero carry no preference; keep the old state.
    let belief = if sum > 0.0 {
        BeliefState {
            b: [clamped[0] / sum, clamped[1] / sum],
        }
    } else {
        b
    };
    StepDetail {
        error,
        rates,
        raw,
        belief,
    }
}

/// One Euler step of the belief dynamics, clamped and renormalized.
pub fn belief_step(b: BeliefState, x: f64, models: &ModelPair, cfg: &ClassifierConfig) -> BeliefState {
    belief_step_detail(b, x, models, cfg).belief
}

/// One row of a belief trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub t: f64,
    pub b1: f64,
    pub b2: f64,
    /// `None` on skipped samples.
    pub x_obs: Option<f64>,
    pub error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    /// `None` while undecided.
    pub label: Option<CarefulnessLabel>,
    /// Sample index of the first threshold crossing.
    pub step_index: Option<usize>,
    pub time: Option<f64>,
    pub final_beliefs: BeliefState,
    pub trace: Vec<TraceRow>,
}

impl Decision {
    pub fn is_decided(&self) -> bool {
        self.label.is_some()
    }
}

/// Streaming classifier. Samples arrive one at a time; the speed at a sample
/// is a central difference, so each belief update lags the newest sample by
/// one. [`OnlineClassifier::finish`] flushes the last update with a one-sided
/// difference.
#[derive(Debug, Clone)]
pub struct OnlineClassifier<'a> {
    models: &'a ModelPair,
    cfg: ClassifierConfig,
    belief: BeliefState,
    window: Vec<(f64, f64)>,
    /// Index of the next sample.
    received: usize,
    /// (x, ẋ) of the last sample whose speed is known.
    last: Option<(f64, f64)>,
    label: Option<CarefulnessLabel>,
    step_index: Option<usize>,
    time: Option<f64>,
    trace: Vec<TraceRow>,
}

impl<'a> OnlineClassifier<'a> {
    pub fn new(models: &'a ModelPair, cfg: ClassifierConfig) -> Result<Self, ClassifierError> {
        cfg.validate()?;
        Ok(Self {
            models,
            cfg,
            belief: BeliefState::default(),
            window: Vec::with_capacity(3),
            received: 0,
            last: None,
            label: None,
            step_index: None,
            time: None,
            trace: Vec::new(),
        })
    }

    pub fn belief(&self) -> BeliefState {
        self.belief
    }

    pub fn label(&self) -> Option<CarefulnessLabel> {
        self.label
    }

    /// Feed the distance `x` (m) observed at time `t` (s).
    pub fn push(&mut self, t: f64, x: f64) {
        self.window.push((t, x));
        if self.window.len() > 3 {
            self.window.remove(0);
        }
        self.received += 1;
        let w = &self.window;
        match w.len() {
            2 => {
                let (t0, x0) = w[0];
                let (t1, x1) = w[1];
                self.last = Some((x0, (x1 - x0) / (t1 - t0)));
            }
            3 => {
                let (ta, xa) = w[0];
                let (tb, xb) = w[1];
                let (tc, xc) = w[2];
                self.update(self.received - 2, tb, xb, (xc - xa) / (tc - ta));
            }
            _ => {}
        }
    }

    /// Close the stream, processing the final sample.
    pub fn finish(mut self) -> Decision {
        let w = &self.window;
        if w.len() >= 2 {
            let (ta, xa) = w[w.len() - 2];
            let (tb, xb) = w[w.len() - 1];
            self.update(self.received - 1, tb, xb, (xb - xa) / (tb - ta));
        }
        Decision {
            label: self.label,
            step_index: self.step_index,
            time: self.time,
            final_beliefs: self.belief,
            trace: self.trace,
        }
    }

    fn update(&mut self, index: usize, t: f64, x: f64, xdot: f64) {
        let Some((x_prev, xdot_prev)) = self.last.replace((x, xdot)) else {
            return;
        };
        let obs = slope_observation(x_prev, x, xdot_prev, xdot, &self.cfg);
        let mut error = None;
        if let Observation::Slope(value) = obs {
            let d = belief_step_detail(self.belief, value, self.models, &self.cfg);
            self.belief = d.belief;
            error = Some(d.error);
        }
        if self.label.is_none() {
            if let Some(l) = self.belief.leader(self.cfg.decision_threshold) {
                self.label = Some(l);
                self.step_index = Some(index);
                self.time = Some(t);
            }
        }
        self.trace.push(TraceRow {
            step: index,
            t,
            b1: self.belief.b[0],
            b2: self.belief.b[1],
            x_obs: obs.value(),
            error,
        });
    }
}

/// Run the belief system over a whole distance stream.
pub fn classify_online(dist: &ScalarSeries, models: &ModelPair, cfg: &ClassifierConfig) -> Result<Decision, ClassifierError> {
    cfg.validate()?;
    if dist.len() < 2 {
        return Err(ClassifierError::ShortStream(dist.len()));
    }
    let dt = dist.uniform_dt()?;
    if (dt - cfg.dt).abs() > 0.1 * cfg.dt {
        return Err(ClassifierError::RateMismatch {
            found: dt,
            expected: cfg.dt,
        });
    }
    let mut c = OnlineClassifier::new(models, *cfg)?;
    for (t, x) in dist.t().iter().zip(dist.values()) {
        c.push(*t, *x);
    }
    Ok(c.finish())
}

/// Write a trace as CSV with columns step,t,b1,b2,X,e. Skipped samples
/// leave X and e empty.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<(), ClassifierError> {
    let mut w = csv::Writer::from_writer(out);
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    w.write_record(["step", "t", "b1", "b2", "X", "e"])
        .map_err(csv_io)?;
    for r in trace {
        w.write_record([
            r.step.to_string(),
            r.t.to_string(),
            r.b1.to_string(),
            r.b2.to_string(),
            opt(r.x_obs),
            opt(r.error),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> ClassifierError {
    ClassifierError::Io(std::io::Error::other(e))
}
