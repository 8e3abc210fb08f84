//! Synthetic labeled handover trajectories at desk scale.
//!
//! A trial is a rest period, a reach from the resting hand to the cup, a
//! transport from the cup to the handover location and a short hold there.
//! Each moving segment follows a single-peaked speed profile whose duration
//! and peak speed are drawn per label.

use std::f64::consts::{E, PI};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::robosim::VelocityProfile;
use crate::signal::{sub3, Condition, Cup, PhaseMarks, Sample, Trajectory, TrialMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("invalid min-jerk parameters: distance {distance} m, duration {duration} s, rate {rate} Hz")]
    InvalidMinJerk {
        distance: f64,
        duration: f64,
        rate: f64,
    },
}

/// Index 0 is not careful and index 1 careful, matching the belief order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarefulnessLabel {
    NotCareful,
    Careful,
}

impl CarefulnessLabel {
    pub const ALL: [CarefulnessLabel; 2] = [Self::NotCareful, Self::Careful];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotCareful => "not_careful",
            Self::Careful => "careful",
        }
    }

    /// Cup content that elicits this label.
    pub fn cup(self) -> Cup {
        match self {
            Self::NotCareful => Cup::Empty,
            Self::Careful => Cup::Full,
        }
    }
}

impl From<Cup> for CarefulnessLabel {
    fn from(cup: Cup) -> Self {
        match cup {
            Cup::Empty => Self::NotCareful,
            Cup::Full => Self::Careful,
        }
    }
}

impl fmt::Display for CarefulnessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinJerkParams {
    /// Meters.
    pub distance: f64,
    /// Seconds.
    pub duration: f64,
    pub sample_rate_hz: f64,
}

/// Closed-form min-jerk speed at time `t` for a move of `d` meters in `T` s.
pub fn min_jerk_speed(d: f64, duration: f64, t: f64) -> f64 {
    let tau = (t / duration).clamp(0.0, 1.0);
    30.0 * d / duration * tau * tau * (1.0 - tau) * (1.0 - tau)
}

/// Sampled min-jerk speed profile. The grid has an even number of intervals
/// so the peak at T/2 is sampled exactly.
pub fn min_jerk(params: MinJerkParams) -> Result<VelocityProfile, SynthError> {
    let MinJerkParams {
        distance,
        duration,
        sample_rate_hz,
    } = params;
    if !(distance > 0.0 && duration > 0.0 && sample_rate_hz > 0.0)
        || !(distance * duration * sample_rate_hz).is_finite()
    {
        return Err(SynthError::InvalidMinJerk {
            distance,
            duration,
            rate: sample_rate_hz,
        });
    }
    let mut intervals = ((duration * sample_rate_hz).round() as usize).max(2);
    intervals += intervals % 2;
    let dt = duration / intervals as f64;
    let values = (0..=intervals)
        .map(|i| {
            let tau = i as f64 / intervals as f64;
            30.0 * distance / duration * tau * tau * (1.0 - tau) * (1.0 - tau)
        })
        .collect();
    Ok(VelocityProfile::new(dt, values).expect("min-jerk samples are valid"))
}

/// Normalized position profile of a moving segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentShape {
    /// Symmetric quintic, s = 10τ³ − 15τ⁴ + 6τ⁵.
    MinJerk,
    /// Critically damped approach, s ∝ 1 − (1 + cτ)e^(−cτ), normalized to
    /// reach 1 at τ = 1. Early peak and a long exponential tail.
    Attractor { stiffness: f64 },
}

impl SegmentShape {
    /// Normalized position at phase `tau` in [0, 1].
    pub fn position(&self, tau: f64) -> f64 {
        let tau = tau.clamp(0.0, 1.0);
        match *self {
            Self::MinJerk => tau * tau * tau * (10.0 - 15.0 * tau + 6.0 * tau * tau),
            Self::Attractor { stiffness: c } => {
                (1.0 - (1.0 + c * tau) * (-c * tau).exp()) / attractor_norm(c)
            }
        }
    }

    /// Peak of ds/dτ.
    pub fn peak_rate(&self) -> f64 {
        match *self {
            Self::MinJerk => 15.0 / 8.0,
            Self::Attractor { stiffness: c } => c / (E * attractor_norm(c)),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            Self::MinJerk => Ok(()),
            Self::Attractor { stiffness } if stiffness > 1.0 && stiffness.is_finite() => Ok(()),
            Self::Attractor { stiffness } => Err(format!("attractor stiffness {stiffness} must exceed 1")),
        }
    }
}

fn attractor_norm(c: f64) -> f64 {
    1.0 - (1.0 + c) * (-c).exp()
}

/// Floor for every sampled segment duration, seconds.
pub const MIN_DURATION: f64 = 0.3;

/// Gaussian duration truncated at ±3σ and at [`MIN_DURATION`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationDist {
    pub mean: f64,
    pub std: f64,
}

impl DurationDist {
    pub fn bounds(&self) -> (f64, f64) {
        (
            (self.mean - 3.0 * self.std).max(MIN_DURATION),
            self.mean + 3.0 * self.std,
        )
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.bounds();
        loop {
            let z: f64 = StandardNormal.sample(rng);
            let d = self.mean + self.std * z;
            if (lo..=hi).contains(&d) {
                return d;
            }
        }
    }

    fn validate(&self, what: &str) -> Result<(), String> {
        let (lo, hi) = self.bounds();
        if self.std >= 0.0 && self.mean.is_finite() && self.std.is_finite() && hi >= lo {
            Ok(())
        } else {
            Err(format!("{what} duration {}±{} s leaves no admissible values", self.mean, self.std))
        }
    }
}

/// Where the motion happens. The cup and start positions follow from the
/// sampled segment lengths, laid out backwards from the handover location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthGeometry {
    /// Handover location, m.
    pub handover: [f64; 3],
    /// Direction from the handover location towards the cup.
    pub cup_direction: [f64; 3],
    /// Direction from the cup towards the resting hand.
    pub rest_direction: [f64; 3],
    /// Std of the per-trial perturbation of both directions, rad (approx.).
    pub direction_spread: f64,
    /// Max lateral bulge of a segment's path, m.
    pub path_jitter: f64,
}

impl Default for SynthGeometry {
    fn default() -> Self {
        Self {
            handover: [0.0, 0.0, 1.0],
            cup_direction: [-0.95, 0.0, -0.3],
            rest_direction: [0.0, -1.0, 0.2],
            direction_spread: 0.1,
            path_jitter: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    /// Transport duration for empty (not careful) cups.
    pub transport_duration_not_careful: DurationDist,
    /// Transport duration for full (careful) cups.
    pub transport_duration_careful: DurationDist,
    /// Reach duration, shared by both labels.
    pub reach_duration: DurationDist,
    /// Peak transport speed of not careful motions, m/s.
    pub transport_peak_not_careful: f64,
    /// Careful minus not careful transport peak speed, m/s.
    pub transport_peak_gap: f64,
    /// Peak reach speed of not careful motions, m/s.
    pub reach_peak_not_careful: f64,
    /// Careful minus not careful reach peak speed, m/s.
    pub reach_peak_gap: f64,
    /// Per-trial std of peak speeds, m/s. Truncated at ±3σ.
    pub peak_speed_std: f64,
    pub shape: SegmentShape,
    /// Std of white positional noise per axis, m.
    pub noise_std: f64,
    /// Stationary time before the reach, s.
    pub pre_dwell: f64,
    /// Stationary time at the handover location after transport, s.
    pub handover_hold: f64,
    pub geometry: SynthGeometry,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 120.0,
            transport_duration_not_careful: DurationDist {
                mean: 1.62,
                std: 0.5,
            },
            transport_duration_careful: DurationDist {
                mean: 2.32,
                std: 0.59,
            },
            reach_duration: DurationDist {
                mean: 1.0,
                std: 0.2,
            },
            transport_peak_not_careful: 0.95,
            transport_peak_gap: -0.276,
            reach_peak_not_careful: 1.1,
            reach_peak_gap: -0.202,
            peak_speed_std: 0.08,
            shape: SegmentShape::Attractor { stiffness: 8.0 },
            noise_std: 0.001,
            pre_dwell: 0.2,
            handover_hold: 0.3,
            geometry: SynthGeometry::default(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample rate {} Hz", self.sample_rate_hz));
        }
        for (d, what) in [
            (&self.transport_duration_not_careful, "not careful transport"),
            (&self.transport_duration_careful, "careful transport"),
            (&self.reach_duration, "reach"),
        ] {
            d.validate(what).map_err(SynthError::InvalidConfig)?;
        }
        let spread = 3.0 * self.peak_speed_std;
        for (base, gap, what) in [
            (self.transport_peak_not_careful, self.transport_peak_gap, "transport"),
            (self.reach_peak_not_careful, self.reach_peak_gap, "reach"),
        ] {
            if !(base - spread > 0.0 && base + gap - spread > 0.0) {
                return bad(format!("{what} peak speeds must stay positive"));
            }
        }
        if !(self.peak_speed_std >= 0.0 && self.noise_std >= 0.0) {
            return bad("negative std".into());
        }
        if !(self.pre_dwell >= 0.0 && self.handover_hold >= 0.0) {
            return bad("negative dwell".into());
        }
        let g = &self.geometry;
        if super::signal::norm3(g.cup_direction) == 0.0 || super::signal::norm3(g.rest_direction) == 0.0 {
            return bad("zero direction vector".into());
        }
        if !(g.direction_spread >= 0.0 && g.path_jitter >= 0.0) {
            return bad("negative geometry jitter".into());
        }
        self.shape.validate().map_err(SynthError::InvalidConfig)
    }

    pub fn transport_duration(&self, label: CarefulnessLabel) -> &DurationDist {
        match label {
            CarefulnessLabel::NotCareful => &self.transport_duration_not_careful,
            CarefulnessLabel::Careful => &self.transport_duration_careful,
        }
    }

    /// Mean peak speeds (reach, transport) for `label`.
    pub fn mean_peaks(&self, label: CarefulnessLabel) -> (f64, f64) {
        match label {
            CarefulnessLabel::NotCareful => (self.reach_peak_not_careful, self.transport_peak_not_careful),
            CarefulnessLabel::Careful => (
                self.reach_peak_not_careful + self.reach_peak_gap,
                self.transport_peak_not_careful + self.transport_peak_gap,
            ),
        }
    }
}

/// Kinematic parameters drawn for one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialDraw {
    pub reach_peak: f64,
    pub reach_duration: f64,
    pub transport_peak: f64,
    pub transport_duration: f64,
}

struct Segment {
    from: [f64; 3],
    to: [f64; 3],
    bulge: [f64; 3],
}

impl Segment {
    fn at(&self, shape: &SegmentShape, tau: f64) -> [f64; 3] {
        let s = shape.position(tau);
        let b = (PI * s).sin();
        let mut p = [0.0; 3];
        for k in 0..3 {
            p[k] = self.from[k] + s * (self.to[k] - self.from[k]) + b * self.bulge[k];
        }
        p
    }
}

fn normal3<R: Rng>(rng: &mut R) -> [f64; 3] {
    [
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    ]
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = super::signal::norm3(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn perturbed<R: Rng>(dir: [f64; 3], spread: f64, rng: &mut R) -> [f64; 3] {
    let g = normal3(rng);
    let d = unit(dir);
    unit([d[0] + spread * g[0], d[1] + spread * g[1], d[2] + spread * g[2]])
}

/// Random vector perpendicular to `dir` with length `amplitude·u`, u ∈ [−1, 1].
fn bulge<R: Rng>(dir: [f64; 3], amplitude: f64, rng: &mut R) -> [f64; 3] {
    let g = normal3(rng);
    let u: f64 = rng.gen_range(-1.0..=1.0);
    let along = g[0] * dir[0] + g[1] * dir[1] + g[2] * dir[2];
    let perp = [g[0] - along * dir[0], g[1] - along * dir[1], g[2] - along * dir[2]];
    let n = super::signal::norm3(perp);
    if n < 1e-12 {
        return [0.0; 3];
    }
    [
        amplitude * u * perp[0] / n,
        amplitude * u * perp[1] / n,
        amplitude * u * perp[2] / n,
    ]
}

fn truncated_z<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 3.0 {
            return z;
        }
    }
}

/// One synthetic trial. Deterministic in (label, cfg, seed); with equal
/// seeds the peak-speed draws of the two labels differ exactly by the
/// configured gaps.
pub fn synth_trial(label: CarefulnessLabel, cfg: &SynthConfig, seed: u64) -> Result<Trajectory, SynthError> {
    synth_trial_with_draw(label, cfg, seed).map(|(t, _)| t)
}

/// Like [`synth_trial`], also returning the kinematic draw.
pub fn synth_trial_with_draw(
    label: CarefulnessLabel,
    cfg: &SynthConfig,
    seed: u64,
) -> Result<(Trajectory, TrialDraw), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = &cfg.geometry;
    let (reach_mean, transport_mean) = cfg.mean_peaks(label);
    let reach_peak = reach_mean + cfg.peak_speed_std * truncated_z(&mut rng);
    let transport_peak = transport_mean + cfg.peak_speed_std * truncated_z(&mut rng);
    let cup_dir = perturbed(g.cup_direction, g.direction_spread, &mut rng);
    let rest_dir = perturbed(g.rest_direction, g.direction_spread, &mut rng);
    let transport_bulge = bulge(cup_dir, g.path_jitter, &mut rng);
    let reach_bulge = bulge(rest_dir, g.path_jitter, &mut rng);
    let reach_duration = cfg.reach_duration.sample(&mut rng);
    let transport_duration = cfg.transport_duration(label).sample(&mut rng);

    let fs = cfg.sample_rate_hz;
    let samples_for = |secs: f64| (secs * fs).round() as usize;
    let n_pre = samples_for(cfg.pre_dwell);
    let n_reach = samples_for(reach_duration).max(2);
    let n_transport = samples_for(transport_duration).max(2);
    let n_hold = samples_for(cfg.handover_hold).max(1);
    // Lengths follow from the realized segment durations and peak speeds.
    let rate = cfg.shape.peak_rate();
    let transport_len = transport_peak * (n_transport as f64 / fs) / rate;
    let reach_len = reach_peak * (n_reach as f64 / fs) / rate;

    let handover = g.handover;
    let cup = add_scaled(handover, cup_dir, transport_len);
    let rest = add_scaled(cup, rest_dir, reach_len);
    let reach = Segment {
        from: rest,
        to: cup,
        bulge: reach_bulge,
    };
    let transport = Segment {
        from: cup,
        to: handover,
        bulge: transport_bulge,
    };

    let marks = PhaseMarks {
        reach: n_pre,
        grasp: n_pre + n_reach,
        handover: n_pre + n_reach + n_transport,
    };
    let total = marks.handover + n_hold;
    let mut samples = Vec::with_capacity(total);
    for k in 0..total {
        let pos = if k < marks.reach {
            rest
        } else if k < marks.grasp {
            reach.at(&cfg.shape, (k - marks.reach) as f64 / n_reach as f64)
        } else if k < marks.handover {
            transport.at(&cfg.shape, (k - marks.grasp) as f64 / n_transport as f64)
        } else {
            handover
        };
        samples.push(Sample::new(k as f64 / fs, pos));
    }
    if cfg.noise_std > 0.0 {
        for s in &mut samples {
            for p in &mut s.pos {
                let z: f64 = StandardNormal.sample(&mut rng);
                *p += cfg.noise_std * z;
            }
        }
    }
    let meta = TrialMeta {
        trial_id: format!("{}-{seed:016x}", label.cup()),
        cup: label.cup(),
        condition: Condition::Neu,
        phases: Some(marks),
    };
    let traj = Trajectory::new(samples, meta).map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let draw = TrialDraw {
        reach_peak,
        reach_duration: n_reach as f64 / fs,
        transport_peak,
        transport_duration: n_transport as f64 / fs,
    };
    Ok((traj, draw))
}

fn add_scaled(p: [f64; 3], d: [f64; 3], s: f64) -> [f64; 3] {
    [p[0] + s * d[0], p[1] + s * d[1], p[2] + s * d[2]]
}

/// SplitMix64 finalizer, used to derive independent per-trial seeds.
pub fn mix_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n_per_label` trials of each label, sorted by trial id.
pub fn synth_dataset(n_per_label: usize, cfg: &SynthConfig, seed: u64) -> Result<Vec<Trajectory>, SynthError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(2 * n_per_label);
    for label in CarefulnessLabel::ALL {
        for i in 0..n_per_label {
            let mut traj = synth_trial(label, cfg, mix_seed(seed, label.index() as u64 + 1, i as u64))?;
            traj.meta_mut().trial_id = format!("{}-{i:04}", label.cup());
            out.push(traj);
        }
    }
    out.sort_by(|a, b| a.meta().trial_id.cmp(&b.meta().trial_id));
    Ok(out)
}

/// Distance from the transport's end to `target`; convenience for checks.
pub fn endpoint_error(traj: &Trajectory, target: [f64; 3]) -> Option<f64> {
    let marks = traj.meta().phases?;
    let s = traj.samples().get(marks.handover)?;
    Some(super::signal::norm3(sub3(s.pos, target)))
}
