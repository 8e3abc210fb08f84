//! Per-class Gaussian models over the (distance, speed) phase plane.

mod eigen;
mod model_file;

pub use eigen::{sym_eigen2, SymEigen2};
pub use model_file::{load_model, parse_model, render_model, save_model, MODEL_FORMAT_HEADER};

use thiserror::Error;

use crate::signal::{derivative, phase_distance, DistanceTarget, MotionPhase, ScalarSeries, SignalError, StreamFilter, Trajectory};
use crate::synth::CarefulnessLabel;

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("need at least {min} phase points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("degenerate {label} model: eigenvalue ratio {ratio:.3} below {min}")]
    Degenerate {
        label: CarefulnessLabel,
        ratio: f64,
        min: f64,
    },
    #[error("{label} model has a vertical principal direction (|v_x| = {v_x:e})")]
    Vertical { label: CarefulnessLabel, v_x: f64 },
    #[error("dataset has no {0} trials")]
    MissingLabel(CarefulnessLabel),
    #[error("trial {trial}: {source}")]
    Trial {
        trial: String,
        #[source]
        source: SignalError,
    },
    #[error("model file: {0}")]
    Format(String),
    #[error("model file validation: {0}")]
    Validation(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Minimum number of points accepted by [`fit_behavior`].
pub const MIN_POINTS: usize = 10;
/// Smallest admissible λ₁/λ₂.
pub const MIN_EIGEN_RATIO: f64 = 4.0;
/// Smallest admissible |v_x|.
pub const MIN_VX: f64 = 1e-6;

/// One (x, ẋ) observation; x in m, ẋ in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: f64,
    pub xdot: f64,
}

/// Gaussian over (x, ẋ) with its principal direction.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorModel {
    pub label: CarefulnessLabel,
    pub n_points: usize,
    /// (x̄, ẋ̄).
    pub mean: [f64; 2],
    /// Row-major [[Σxx, Σxẋ], [Σẋx, Σẋẋ]].
    pub cov: [[f64; 2]; 2],
    /// λ₁ ≥ λ₂.
    pub eigenvalues: [f64; 2],
    /// Principal eigenvector in (ẋ, x) order: [v_ẋ, v_x], with v_x > 0.
    pub eigenvector: [f64; 2],
    /// Y = v_ẋ / v_x, 1/s.
    pub slope: f64,
}

impl BehaviorModel {
    /// Build from moments, running the eigen-decomposition and all checks.
    pub fn from_moments(
        label: CarefulnessLabel,
        n_points: usize,
        mean: [f64; 2],
        cov: [[f64; 2]; 2],
    ) -> Result<Self, BehaviorError> {
        let (a, b, c) = (cov[0][0], 0.5 * (cov[0][1] + cov[1][0]), cov[1][1]);
        let eig = sym_eigen2(a, b, c);
        let [l1, l2] = eig.values;
        let eps = 1e-15 * l1.abs().max(f64::MIN_POSITIVE);
        let ratio = l1 / l2.max(eps);
        if !(l1 > 0.0) || ratio < MIN_EIGEN_RATIO {
            return Err(BehaviorError::Degenerate {
                label,
                ratio: if l1 > 0.0 { ratio } else { 0.0 },
                min: MIN_EIGEN_RATIO,
            });
        }
        let [mut vx, mut vxd] = eig.principal;
        if vx < 0.0 {
            vx = -vx;
            vxd = -vxd;
        }
        if vx < MIN_VX {
            return Err(BehaviorError::Vertical { label, v_x: vx });
        }
        Ok(Self {
            label,
            n_points,
            mean,
            cov: [[a, b], [b, c]],
            eigenvalues: [l1, l2.max(0.0)],
            eigenvector: [vxd, vx],
            slope: vxd / vx,
        })
    }

    pub fn v_x(&self) -> f64 {
        self.eigenvector[1]
    }

    pub fn v_xdot(&self) -> f64 {
        self.eigenvector[0]
    }
}

/// Models for both classes; slot 1 is not careful, slot 2 careful.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPair {
    pub not_careful: BehaviorModel,
    pub careful: BehaviorModel,
}

impl ModelPair {
    pub fn new(not_careful: BehaviorModel, careful: BehaviorModel) -> Result<Self, BehaviorError> {
        if not_careful.label != CarefulnessLabel::NotCareful {
            return Err(BehaviorError::Validation("first model must be not careful".into()));
        }
        if careful.label != CarefulnessLabel::Careful {
            return Err(BehaviorError::Validation("second model must be careful".into()));
        }
        Ok(Self { not_careful, careful })
    }

    /// Pair built directly from two slopes, for tests and simulations where
    /// only Y matters. Moments are those of a unit line along each slope.
    pub fn from_slopes(y_not_careful: f64, y_careful: f64) -> Result<Self, BehaviorError> {
        let line = |label, y: f64| {
            BehaviorModel::from_moments(label, MIN_POINTS, [0.0, 0.0], [[1.0, y], [y, y * y]])
        };
        Self::new(
            line(CarefulnessLabel::NotCareful, y_not_careful)?,
            line(CarefulnessLabel::Careful, y_careful)?,
        )
    }

    /// [Y₁, Y₂].
    pub fn slopes(&self) -> [f64; 2] {
        [self.not_careful.slope, self.careful.slope]
    }

    pub fn get(&self, label: CarefulnessLabel) -> &BehaviorModel {
        match label {
            CarefulnessLabel::NotCareful => &self.not_careful,
            CarefulnessLabel::Careful => &self.careful,
        }
    }
}

/// (x, ẋ) pairs of a distance series, endpoints excluded.
pub fn phase_points(dist: &ScalarSeries) -> Result<Vec<PhasePoint>, BehaviorError> {
    let xdot = derivative(dist)?;
    let n = dist.len();
    Ok((1..n - 1)
        .map(|i| PhasePoint {
            x: dist.values()[i],
            xdot: xdot.values()[i],
        })
        .collect())
}

/// Sample mean and covariance (N − 1 denominator), then the model.
pub fn fit_behavior(points: &[PhasePoint], label: CarefulnessLabel) -> Result<BehaviorModel, BehaviorError> {
    if points.len() < MIN_POINTS {
        return Err(BehaviorError::TooFewPoints {
            got: points.len(),
            min: MIN_POINTS,
        });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let mv = points.iter().map(|p| p.xdot).sum::<f64>() / n;
    let (mut sxx, mut sxv, mut svv) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dv) = (p.x - mx, p.xdot - mv);
        sxx += dx * dx;
        sxv += dx * dv;
        svv += dv * dv;
    }
    let d = n - 1.0;
    let cov = [[sxx / d, sxv / d], [sxv / d, svv / d]];
    BehaviorModel::from_moments(label, points.len(), [mx, mv], cov)
}

/// Options for [`fit_pair`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub target: DistanceTarget,
    pub filter: StreamFilter,
    /// Pool reach points as well as transport points.
    pub include_reach: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            target: DistanceTarget::PhaseEnd,
            filter: StreamFilter::offline(),
            include_reach: false,
        }
    }
}

/// Phase points of one trial for the configured phases.
pub fn trial_points(traj: &Trajectory, opts: &FitOptions) -> Result<Vec<PhasePoint>, BehaviorError> {
    let mut phases = vec![MotionPhase::Carry];
    if opts.include_reach {
        phases.insert(0, MotionPhase::Reach);
    }
    let mut out = Vec::new();
    for phase in phases {
        let wrap = |source| BehaviorError::Trial {
            trial: traj.meta().trial_id.clone(),
            source,
        };
        let dist = phase_distance(traj, phase, &opts.target, &opts.filter).map_err(wrap)?;
        out.extend(phase_points(&dist).map_err(|e| match e {
            BehaviorError::Signal(s) => wrap(s),
            other => other,
        })?);
    }
    Ok(out)
}

/// Pool points per label across the dataset and fit both models.
pub fn fit_pair(dataset: &[Trajectory], opts: &FitOptions) -> Result<ModelPair, BehaviorError> {
    let mut pools: [Vec<PhasePoint>; 2] = [Vec::new(), Vec::new()];
    for traj in dataset {
        let label = CarefulnessLabel::from(traj.meta().cup);
        pools[label.index()].extend(trial_points(traj, opts)?);
    }
    for label in CarefulnessLabel::ALL {
        if !dataset.iter().any(|t| CarefulnessLabel::from(t.meta().cup) == label) {
            return Err(BehaviorError::MissingLabel(label));
        }
    }
    let [nc, c] = pools;
    ModelPair::new(
        fit_behavior(&nc, CarefulnessLabel::NotCareful)?,
        fit_behavior(&c, CarefulnessLabel::Careful)?,
    )
}
