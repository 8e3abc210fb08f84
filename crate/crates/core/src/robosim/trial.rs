use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_spill, max_full_cup_accel, neutral_command, secs_to_ticks, step_end_effector, ticks_to_secs,
    ControllerSpec, EndEffectorState, ExpressiveSegment, SimError, SimParams, VelocityProfile, BASE_RATE_HZ,
    ROBOT_DT, ROBOT_TICK_DIVIDER,
};
use crate::behavior::ModelPair;
use crate::classifier::{ClassifierConfig, ClassifierError, Decision, OnlineClassifier};
use crate::signal::{norm3, sub3, Biquad, Condition, Cup, FilterSpec, StreamFilter, Trajectory};
use crate::synth::CarefulnessLabel;

/// Cups per block.
pub const BLOCK_SIZE: usize = 4;

/// Upper bound on robot motion after the handover, s.
const ROBOT_TIME_LIMIT: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskGeometry {
    /// Where the gripper waits, m.
    pub handover: [f64; 3],
    /// Pour target, m.
    pub bucket: [f64; 3],
    /// Release target, m.
    pub drawer: [f64; 3],
    /// Gripper–wrist distance that triggers the grasp, m.
    pub trigger_distance: f64,
    /// s.
    pub pour_dwell: f64,
    /// Radius of the ball from which per-trial handover locations are drawn, m.
    pub zone_radius: f64,
}

impl Default for TaskGeometry {
    fn default() -> Self {
        Self {
            handover: [0.0, 0.0, 1.0],
            bucket: [0.6, -0.2, 0.95],
            drawer: [0.55, 0.2, 0.85],
            trigger_distance: 0.05,
            pour_dwell: 2.0,
            zone_radius: 0.05,
        }
    }
}

impl TaskGeometry {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidGeometry(m.into()));
        let pts = [self.handover, self.bucket, self.drawer];
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return bad("positions must be finite");
        }
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                if norm3(sub3(*a, *b)) <= super::ARRIVAL_TOLERANCE {
                    return bad("handover, bucket and drawer must be distinct");
                }
            }
        }
        if !(self.trigger_distance > 0.0 && self.trigger_distance.is_finite()) {
            return bad("trigger distance must be positive");
        }
        if !(self.pour_dwell >= 0.0 && self.pour_dwell.is_finite()) {
            return bad("pour dwell must be non-negative");
        }
        if !(self.zone_radius >= 0.0 && self.zone_radius.is_finite()) {
            return bad("zone radius must be non-negative");
        }
        Ok(())
    }

    pub fn with_handover(&self, center: [f64; 3]) -> Self {
        Self {
            handover: center,
            ..*self
        }
    }

    /// Uniform draw from the handover zone.
    pub fn sample_handover<R: Rng>(&self, rng: &mut R) -> [f64; 3] {
        if self.zone_radius == 0.0 {
            return self.handover;
        }
        loop {
            let u: [f64; 3] = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            if norm3(u) <= 1.0 {
                let mut p = self.handover;
                for (p, u) in p.iter_mut().zip(u) {
                    *p += self.zone_radius * u;
                }
                return p;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotPhase {
    WaitingHuman,
    Grasp,
    ToBucket,
    Pour,
    ToDrawer,
    Release,
    Done,
}

impl RobotPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WaitingHuman => "waiting_human",
            Self::Grasp => "grasp",
            Self::ToBucket => "to_bucket",
            Self::Pour => "pour",
            Self::ToDrawer => "to_drawer",
            Self::Release => "release",
            Self::Done => "done",
        }
    }

    /// States a trial passes through for `cup`.
    pub fn sequence(cup: Cup) -> &'static [RobotPhase] {
        use RobotPhase::*;
        match cup {
            Cup::Full => &[WaitingHuman, Grasp, ToBucket, Pour, ToDrawer, Release, Done],
            Cup::Empty => &[WaitingHuman, Grasp, ToDrawer, Release, Done],
        }
    }
}

/// A robot step on the base clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub tick: u64,
    pub phase: RobotPhase,
    pub state: EndEffectorState,
}

/// Classifier fed with the human distance stream while the robot waits.
#[derive(Debug, Clone, Copy)]
pub struct AttachedClassifier<'a> {
    pub models: &'a ModelPair,
    pub config: ClassifierConfig,
    pub filter: StreamFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub label: Option<CarefulnessLabel>,
    pub step_index: Option<usize>,
    pub time: Option<f64>,
    pub final_beliefs: [f64; 2],
    /// Samples consumed before the grasp.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub trial_id: String,
    pub cup: Cup,
    pub condition: Condition,
    /// Base ticks from trial start to the grasp trigger.
    pub handover_ticks: u64,
    /// Base ticks from the grasp trigger to the end of the release.
    pub busy_ticks: u64,
    /// s.
    pub handover_time: f64,
    /// s.
    pub robot_busy_time: f64,
    pub spill: bool,
    /// m/s². Zero for empty cups.
    pub max_full_accel: f64,
    pub decision: Option<DecisionSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub metrics: TrialMetrics,
    pub trace: Vec<TraceSample>,
    /// States in the order they were entered.
    pub visited: Vec<RobotPhase>,
}

struct Robot<'a> {
    state: EndEffectorState,
    tick: u64,
    trace: Vec<TraceSample>,
    visited: Vec<RobotPhase>,
    params: &'a SimParams,
    limit_tick: u64,
    trial_id: &'a str,
}

impl Robot<'_> {
    fn enter(&mut self, phase: RobotPhase) {
        self.visited.push(phase);
    }

    fn step(&mut self, cmd: [f64; 3], phase: RobotPhase) -> Result<(), SimError> {
        self.state = step_end_effector(&self.state, cmd, ROBOT_DT, self.params.speed_cap);
        self.tick += ROBOT_TICK_DIVIDER;
        self.state.t = ticks_to_secs(self.tick);
        self.trace.push(TraceSample {
            tick: self.tick,
            phase,
            state: self.state,
        });
        if self.tick > self.limit_tick {
            return Err(SimError::RobotStalled {
                trial: self.trial_id.to_string(),
                limit: ROBOT_TIME_LIMIT,
            });
        }
        Ok(())
    }

    fn dwell(&mut self, secs: f64, phase: RobotPhase) -> Result<(), SimError> {
        let steps = (secs / ROBOT_DT - 1e-9).ceil().max(0.0) as u64;
        for _ in 0..steps {
            self.step([0.0; 3], phase)?;
        }
        Ok(())
    }

    fn move_neutral(&mut self, target: [f64; 3], k_p: f64, v_const: f64, phase: RobotPhase) -> Result<(), SimError> {
        loop {
            let cmd = neutral_command(&self.state, target, k_p, v_const);
            let speed = norm3(cmd);
            if speed == 0.0 {
                return Ok(());
            }
            let allowed = norm3(self.state.vel) + self.params.neutral_ramp * ROBOT_DT;
            let cmd = if speed > allowed { cmd.map(|c| c / speed * allowed) } else { cmd };
            self.step(cmd, phase)?;
        }
    }

    fn move_expressive(&mut self, target: [f64; 3], profile: &VelocityProfile, phase: RobotPhase) -> Result<(), SimError> {
        let seg = ExpressiveSegment::new(self.state.pos, target, profile)?;
        let mut k = 0u64;
        loop {
            let elapsed = k as f64 * ROBOT_DT;
            if elapsed >= seg.duration() {
                return Ok(());
            }
            self.step(seg.command(elapsed), phase)?;
            k += 1;
        }
    }

    fn transport(&mut self, target: [f64; 3], spec: &ControllerSpec, careful: bool, phase: RobotPhase) -> Result<(), SimError> {
        self.enter(phase);
        match spec {
            ControllerSpec::Neutral { k_p, v_const } => self.move_neutral(target, *k_p, *v_const, phase),
            ControllerSpec::Expressive { careful: c, not_careful: n } => {
                self.move_expressive(target, if careful { c } else { n }, phase)
            }
        }
    }
}

/// Causal distance stream into an [`OnlineClassifier`].
struct Listener<'a> {
    classifier: OnlineClassifier<'a>,
    filter: Option<Biquad>,
    started: bool,
}

impl<'a> Listener<'a> {
    fn new(att: &AttachedClassifier<'a>) -> Result<Self, SimError> {
        if (att.config.dt * BASE_RATE_HZ - 1.0).abs() > 0.1 {
            return Err(ClassifierError::RateMismatch {
                found: 1.0 / BASE_RATE_HZ,
                expected: att.config.dt,
            }
            .into());
        }
        let filter = match att.filter.cutoff_hz {
            Some(c) => Some(Biquad::butterworth(&FilterSpec::new(c, BASE_RATE_HZ)?)),
            None => None,
        };
        Ok(Self {
            classifier: OnlineClassifier::new(att.models, att.config)?,
            filter,
            started: false,
        })
    }

    fn push(&mut self, t: f64, x: f64) {
        let x = match &mut self.filter {
            Some(f) => {
                if !self.started {
                    f.settle(x);
                }
                f.process(x).max(0.0)
            }
            None => x,
        };
        self.started = true;
        self.classifier.push(t, x);
    }

    fn finish(self, samples: usize) -> DecisionSummary {
        let d: Decision = self.classifier.finish();
        DecisionSummary {
            label: d.label,
            step_index: d.step_index,
            time: d.time,
            final_beliefs: d.final_beliefs.b,
            samples,
        }
    }
}

/// Simulate one handover. The human trajectory is replayed one sample per
/// base tick; the robot waits at the handover location until the wrist is
/// within the trigger distance, then grasps, pours if the cup is full,
/// and places the cup in the drawer. An attached classifier sees the carry
/// phase up to the grasp and never influences the motion.
pub fn run_trial(
    cup: Cup,
    condition: Condition,
    human: &Trajectory,
    geometry: &TaskGeometry,
    spec: &ControllerSpec,
    params: &SimParams,
    classifier: Option<&AttachedClassifier<'_>>,
) -> Result<TrialRun, SimError> {
    geometry.validate()?;
    spec.validate()?;
    params.validate()?;
    if spec.condition() != condition {
        return Err(SimError::ConditionMismatch {
            spec: spec.condition().to_string(),
            trial: condition.to_string(),
        });
    }
    let samples = human.samples();
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let period = crate::signal::nominal_period(&t)?;
    if (period * BASE_RATE_HZ - 1.0).abs() > 0.1 {
        return Err(SimError::Human(crate::signal::SignalError::InvalidTrajectory(format!(
            "sample period {period} s, expected 1/{BASE_RATE_HZ} s"
        ))));
    }
    let trial_id = human.meta().trial_id.as_str();
    let gripper = geometry.handover;
    let carry_start = human.meta().phases.map(|m| m.grasp).unwrap_or(0);
    let mut listener = classifier.map(Listener::new).transpose()?;
    let timeout_ticks = secs_to_ticks(params.timeout);

    let mut trigger = None;
    let mut consumed = 0;
    for (g, s) in samples.iter().enumerate() {
        if g as u64 > timeout_ticks {
            break;
        }
        let d = norm3(sub3(s.pos, gripper));
        if g >= carry_start {
            if let Some(l) = &mut listener {
                l.push(s.t, d);
                consumed += 1;
            }
        }
        if d < geometry.trigger_distance {
            trigger = Some(g as u64);
            break;
        }
    }
    let handover_ticks = trigger.ok_or_else(|| SimError::Timeout {
        trial: trial_id.to_string(),
        trigger: geometry.trigger_distance,
        timeout: params.timeout,
    })?;
    let decision = listener.map(|l| l.finish(consumed));

    let mut start = EndEffectorState::at_rest(gripper);
    start.t = ticks_to_secs(handover_ticks);
    let mut robot = Robot {
        state: start,
        tick: handover_ticks,
        trace: vec![TraceSample {
            tick: handover_ticks,
            phase: RobotPhase::WaitingHuman,
            state: start,
        }],
        visited: vec![RobotPhase::WaitingHuman],
        params,
        limit_tick: handover_ticks + secs_to_ticks(ROBOT_TIME_LIMIT),
        trial_id,
    };

    robot.enter(RobotPhase::Grasp);
    robot.dwell(params.grasp_time, RobotPhase::Grasp)?;
    robot.state.holding = Some(cup);
    if cup == Cup::Full {
        robot.transport(geometry.bucket, spec, true, RobotPhase::ToBucket)?;
        robot.enter(RobotPhase::Pour);
        robot.dwell(geometry.pour_dwell, RobotPhase::Pour)?;
        robot.state.holding = Some(Cup::Empty);
    }
    robot.transport(geometry.drawer, spec, false, RobotPhase::ToDrawer)?;
    robot.enter(RobotPhase::Release);
    robot.dwell(params.release_time, RobotPhase::Release)?;
    robot.state.holding = None;
    robot.enter(RobotPhase::Done);

    let states: Vec<EndEffectorState> = robot.trace.iter().map(|s| s.state).collect();
    let (spill, max_full_accel) = match cup {
        Cup::Full => (check_spill(&states, params.spill_accel), max_full_cup_accel(&states)),
        Cup::Empty => (false, 0.0),
    };
    let busy_ticks = robot.tick - handover_ticks;
    Ok(TrialRun {
        metrics: TrialMetrics {
            trial_id: trial_id.to_string(),
            cup,
            condition,
            handover_ticks,
            busy_ticks,
            handover_time: ticks_to_secs(handover_ticks),
            robot_busy_time: ticks_to_secs(busy_ticks),
            spill,
            max_full_accel,
            decision,
        },
        trace: robot.trace,
        visited: robot.visited,
    })
}

/// One trial of a block: the human motion and where it ends.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTrial {
    pub human: Trajectory,
    pub geometry: TaskGeometry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetrics {
    pub condition: Condition,
    pub trials: Vec<TrialMetrics>,
    /// Human time before each trial, base ticks.
    pub latency_ticks: u64,
    pub total_ticks: u64,
    pub robot_ticks: u64,
    pub net_ticks: u64,
    /// s.
    pub total_duration: f64,
    /// s.
    pub robot_busy_time: f64,
    /// s.
    pub net_human_time: f64,
}

/// Block duration minus the robot segments, in base ticks.
pub fn net_human_ticks(total: u64, robot_segments: &[u64]) -> Result<u64, SimError> {
    let robot = robot_segments
        .iter()
        .try_fold(0u64, |acc, s| acc.checked_add(*s))
        .ok_or(SimError::InconsistentLog)?;
    total.checked_sub(robot).ok_or(SimError::InconsistentLog)
}

/// Run a block of four cups, two of each kind, in the given order. Each
/// trial is preceded by `latency` seconds of human time. An attached
/// classifier is restarted for every trial.
pub fn run_block(
    trials: &[BlockTrial],
    condition: Condition,
    spec: &ControllerSpec,
    params: &SimParams,
    latency: f64,
    classifier: Option<&AttachedClassifier<'_>>,
) -> Result<BlockMetrics, SimError> {
    let cups: Vec<Cup> = trials.iter().map(|t| t.human.meta().cup).collect();
    let full = cups.iter().filter(|c| **c == Cup::Full).count();
    if cups.len() != BLOCK_SIZE || full * 2 != BLOCK_SIZE {
        let names: Vec<&str> = cups.iter().map(|c| c.as_str()).collect();
        return Err(SimError::UnbalancedBlock(format!("[{}]", names.join(", "))));
    }
    if !(latency >= 0.0 && latency.is_finite()) {
        return Err(SimError::InvalidParams("inter-trial latency must be non-negative".into()));
    }
    let latency_ticks = secs_to_ticks(latency);
    let mut metrics = Vec::with_capacity(BLOCK_SIZE);
    let mut total = 0u64;
    for bt in trials {
        let run = run_trial(bt.human.meta().cup, condition, &bt.human, &bt.geometry, spec, params, classifier)?;
        total += latency_ticks + run.metrics.handover_ticks + run.metrics.busy_ticks;
        metrics.push(run.metrics);
    }
    let busy: Vec<u64> = metrics.iter().map(|m| m.busy_ticks).collect();
    let robot_ticks: u64 = busy.iter().sum();
    let net_ticks = net_human_ticks(total, &busy)?;
    Ok(BlockMetrics {
        condition,
        trials: metrics,
        latency_ticks,
        total_ticks: total,
        robot_ticks,
        net_ticks,
        total_duration: ticks_to_secs(total),
        robot_busy_time: ticks_to_secs(robot_ticks),
        net_human_time: ticks_to_secs(net_ticks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{PhaseMarks, Sample, TrialMeta};

    /// Wrist moving along x at 0.5 m/s into `end`, then holding.
    fn approach(end: [f64; 3], cup: Cup) -> Trajectory {
        let samples = (0..360)
            .map(|i| {
                let t = i as f64 / 120.0;
                let back = (0.5 * (2.0 - t)).max(0.0);
                Sample::new(t, [end[0] - back, end[1], end[2]])
            })
            .collect();
        let meta = TrialMeta {
            trial_id: format!("{cup}-x"),
            cup,
            condition: Condition::Neu,
            phases: Some(PhaseMarks {
                reach: 0,
                grasp: 60,
                handover: 240,
            }),
        };
        Trajectory::new(samples, meta).unwrap()
    }

    fn run(cup: Cup, spec: &ControllerSpec) -> TrialRun {
        let g = TaskGeometry::default();
        run_trial(cup, spec.condition(), &approach(g.handover, cup), &g, spec, &SimParams::default(), None).unwrap()
    }

    #[test]
    fn trigger_fires_at_threshold() {
        let r = run(Cup::Empty, &ControllerSpec::default_neutral());
        // Distance 0.5·(2 − t) < 0.05 first at t = 1.9 + one tick.
        assert_eq!(r.metrics.handover_ticks, 229);
    }

    #[test]
    fn visits_states_in_order() {
        for spec in [ControllerSpec::default_neutral(), ControllerSpec::default_expressive()] {
            for cup in [Cup::Empty, Cup::Full] {
                let r = run(cup, &spec);
                assert_eq!(r.visited, RobotPhase::sequence(cup));
                assert_eq!(r.metrics.busy_ticks % ROBOT_TICK_DIVIDER, 0);
            }
        }
    }

    #[test]
    fn full_cup_is_poured_before_release() {
        let r = run(Cup::Full, &ControllerSpec::default_expressive());
        let pour: Vec<&TraceSample> = r.trace.iter().filter(|s| s.phase == RobotPhase::Pour).collect();
        assert_eq!(pour.len(), 80);
        let first_release = r.trace.iter().position(|s| s.phase == RobotPhase::Release).unwrap();
        let last_pour = r.trace.iter().rposition(|s| s.phase == RobotPhase::Pour).unwrap();
        assert!(last_pour < first_release);
        assert!(r.trace[..=last_pour]
            .iter()
            .filter(|s| s.phase != RobotPhase::WaitingHuman && s.phase != RobotPhase::Grasp)
            .all(|s| s.state.holding.is_some()));
    }

    #[test]
    fn arrives_at_targets() {
        let g = TaskGeometry::default();
        for spec in [ControllerSpec::default_neutral(), ControllerSpec::default_expressive()] {
            let r = run(Cup::Full, &spec);
            let at_bucket = r.trace.iter().rfind(|s| s.phase == RobotPhase::ToBucket).unwrap();
            assert!(norm3(sub3(at_bucket.state.pos, g.bucket)) < 1e-3);
            let end = r.trace.last().unwrap();
            assert!(norm3(sub3(end.state.pos, g.drawer)) < 2e-3);
        }
    }

    #[test]
    fn default_controllers_do_not_spill() {
        for spec in [ControllerSpec::default_neutral(), ControllerSpec::default_expressive()] {
            let r = run(Cup::Full, &spec);
            assert!(!r.metrics.spill, "{:?}: {}", spec.condition(), r.metrics.max_full_accel);
        }
    }

    #[test]
    fn busy_time_ordering() {
        let (neu, exp) = (ControllerSpec::default_neutral(), ControllerSpec::default_expressive());
        assert!(run(Cup::Empty, &exp).metrics.busy_ticks < run(Cup::Empty, &neu).metrics.busy_ticks);
        assert!(run(Cup::Full, &neu).metrics.busy_ticks < run(Cup::Full, &exp).metrics.busy_ticks);
    }

    #[test]
    fn timeout_when_wrist_stays_away() {
        let g = TaskGeometry::default();
        let far = approach([g.handover[0], g.handover[1] + 0.5, g.handover[2]], Cup::Empty);
        let err = run_trial(Cup::Empty, Condition::Neu, &far, &g, &ControllerSpec::default_neutral(), &SimParams::default(), None);
        assert!(matches!(err, Err(SimError::Timeout { .. })));
    }

    #[test]
    fn condition_must_match_spec() {
        let g = TaskGeometry::default();
        let h = approach(g.handover, Cup::Empty);
        let err = run_trial(Cup::Empty, Condition::Exp, &h, &g, &ControllerSpec::default_neutral(), &SimParams::default(), None);
        assert!(matches!(err, Err(SimError::ConditionMismatch { .. })));
    }

    #[test]
    fn net_time_from_log() {
        let total = secs_to_ticks(60.0);
        let segs = [secs_to_ticks(3.0); 4];
        assert_eq!(ticks_to_secs(net_human_ticks(total, &segs).unwrap()), 48.0);
        assert!(net_human_ticks(10, &[6, 6]).is_err());
    }

    fn block(cups: &[Cup]) -> Vec<BlockTrial> {
        let g = TaskGeometry::default();
        cups.iter()
            .map(|c| BlockTrial {
                human: approach(g.handover, *c),
                geometry: g,
            })
            .collect()
    }

    #[test]
    fn block_requires_balance() {
        let p = SimParams::default();
        let spec = ControllerSpec::default_neutral();
        let three = block(&[Cup::Empty, Cup::Full, Cup::Full]);
        assert!(matches!(run_block(&three, Condition::Neu, &spec, &p, 0.0, None), Err(SimError::UnbalancedBlock(_))));
        let skewed = block(&[Cup::Empty, Cup::Full, Cup::Full, Cup::Full]);
        assert!(run_block(&skewed, Condition::Neu, &spec, &p, 0.0, None).is_err());
    }

    #[test]
    fn net_time_is_condition_independent() {
        let p = SimParams::default();
        let trials = block(&[Cup::Empty, Cup::Full, Cup::Full, Cup::Empty]);
        let neu = run_block(&trials, Condition::Neu, &ControllerSpec::default_neutral(), &p, 0.0, None).unwrap();
        let exp = run_block(&trials, Condition::Exp, &ControllerSpec::default_expressive(), &p, 0.0, None).unwrap();
        assert_eq!(neu.net_ticks, exp.net_ticks);
        assert_ne!(neu.total_ticks, exp.total_ticks);
        for b in [&neu, &exp] {
            assert_eq!(b.total_ticks, b.net_ticks + b.robot_ticks);
        }
    }
}
