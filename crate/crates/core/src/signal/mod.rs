//! Signal primitives: trajectories, scalar series, filtering, differentiation,
//! resampling and profile aggregation.

mod butter;
mod stream;
mod trajectory;

pub use butter::{lowpass_butter2, Biquad, FilterSpec, MIN_FILTER_INPUT};
pub use stream::{phase_distance, resolve_target, DistanceTarget, StreamFilter};
pub use trajectory::{Condition, Cup, MotionPhase, PhaseMarks, Sample, Trajectory, TrialMeta};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid filter spec: cutoff {cutoff_hz} Hz must lie in (0, {nyquist_hz}) Hz")]
    InvalidFilterSpec { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("series is not uniformly sampled (interval {index} is {interval} s, nominal {nominal} s)")]
    NonUniform {
        index: usize,
        interval: f64,
        nominal: f64,
    },
    #[error("time and value lengths differ ({t} vs {values})")]
    LengthMismatch { t: usize, values: usize },
    #[error("timestamps must be finite and strictly increasing (at index {0})")]
    NonMonotonic(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("resample needs at least 2 output points, got {0}")]
    ResampleCount(usize),
    #[error("profiles have mismatched lengths ({expected} vs {found})")]
    ProfileLengths { expected: usize, found: usize },
    #[error("no profiles to aggregate")]
    EmptyProfileSet,
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// Maximum deviation of a sampling interval from the nominal period, as a
/// fraction of that period.
pub const MAX_PERIOD_JITTER: f64 = 0.1;

/// Timestamped scalar signal (distance in m, speed in m/s, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    t: Vec<f64>,
    values: Vec<f64>,
}

impl ScalarSeries {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self, SignalError> {
        if t.len() != values.len() {
            return Err(SignalError::LengthMismatch {
                t: t.len(),
                values: values.len(),
            });
        }
        if t.first().is_some_and(|t0| !t0.is_finite()) {
            return Err(SignalError::NonMonotonic(0));
        }
        for i in 1..t.len() {
            if !(t[i].is_finite() && t[i] > t[i - 1]) {
                return Err(SignalError::NonMonotonic(i));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(Self { t, values })
    }

    /// Series sampled at `t0 + i * dt`.
    pub fn from_uniform(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self, SignalError> {
        let t = (0..values.len()).map(|i| t0 + i as f64 * dt).collect();
        Self::new(t, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Copy of the series with the same timestamps and new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, SignalError> {
        Self::new(self.t.clone(), values)
    }

    /// Nominal sample period: mean interval, checked against the jitter bound.
    pub fn uniform_dt(&self) -> Result<f64, SignalError> {
        nominal_period(&self.t)
    }

    /// Contiguous sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, SignalError> {
        let end = end.min(self.len());
        let start = start.min(end);
        Self::new(self.t[start..end].to_vec(), self.values[start..end].to_vec())
    }
}

pub(crate) fn nominal_period(t: &[f64]) -> Result<f64, SignalError> {
    if t.len() < 2 {
        return Err(SignalError::TooShort {
            len: t.len(),
            min: 2,
        });
    }
    let nominal = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (i, w) in t.windows(2).enumerate() {
        let interval = w[1] - w[0];
        if (interval - nominal).abs() > MAX_PERIOD_JITTER * nominal {
            return Err(SignalError::NonUniform {
                index: i,
                interval,
                nominal,
            });
        }
    }
    Ok(nominal)
}

/// Central differences in the interior, first-order one-sided at both ends.
pub fn derivative(series: &ScalarSeries) -> Result<ScalarSeries, SignalError> {
    let n = series.len();
    if n < 3 {
        return Err(SignalError::TooShort { len: n, min: 3 });
    }
    series.uniform_dt()?;
    let (t, v) = (series.t(), series.values());
    let mut d = Vec::with_capacity(n);
    d.push((v[1] - v[0]) / (t[1] - t[0]));
    for i in 1..n - 1 {
        d.push((v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1]));
    }
    d.push((v[n - 1] - v[n - 2]) / (t[n - 1] - t[n - 2]));
    series.with_values(d)
}

/// Euclidean distance from each sample to `target`.
pub fn distance_series(traj: &Trajectory, target: [f64; 3]) -> ScalarSeries {
    let t = traj.samples().iter().map(|s| s.t).collect();
    let d = traj
        .samples()
        .iter()
        .map(|s| norm3(sub3(s.pos, target)))
        .collect();
    ScalarSeries::new(t, d).expect("trajectory invariants guarantee a valid series")
}

/// Linear interpolation onto `n_out` evenly spaced points spanning the
/// original time range. Endpoints are copied exactly.
pub fn resample(series: &ScalarSeries, n_out: usize) -> Result<ScalarSeries, SignalError> {
    if n_out < 2 {
        return Err(SignalError::ResampleCount(n_out));
    }
    if series.len() < 2 {
        return Err(SignalError::TooShort {
            len: series.len(),
            min: 2,
        });
    }
    let (t, v) = (series.t(), series.values());
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let step = (t1 - t0) / (n_out - 1) as f64;
    let mut out_t = Vec::with_capacity(n_out);
    let mut out_v = Vec::with_capacity(n_out);
    let mut j = 0;
    for i in 0..n_out {
        let ti = if i == n_out - 1 { t1 } else { t0 + i as f64 * step };
        while j + 2 < t.len() && t[j + 1] <= ti {
            j += 1;
        }
        let vi = if i == 0 {
            v[0]
        } else if i == n_out - 1 {
            v[v.len() - 1]
        } else {
            let w = (ti - t[j]) / (t[j + 1] - t[j]);
            v[j] + w * (v[j + 1] - v[j])
        };
        out_t.push(ti);
        out_v.push(vi);
    }
    ScalarSeries::new(out_t, out_v)
}

/// Pointwise mean and population standard deviation of equal-length profiles.
/// Timestamps are taken from the first profile.
pub fn aggregate_profiles(
    profiles: &[ScalarSeries],
) -> Result<(ScalarSeries, ScalarSeries), SignalError> {
    let first = profiles.first().ok_or(SignalError::EmptyProfileSet)?;
    let n = first.len();
    if let Some(p) = profiles.iter().find(|p| p.len() != n) {
        return Err(SignalError::ProfileLengths {
            expected: n,
            found: p.len(),
        });
    }
    let k = profiles.len() as f64;
    let mut mean = vec![0.0; n];
    for p in profiles {
        for (m, v) in mean.iter_mut().zip(p.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k);
    let mut var = vec![0.0; n];
    for p in profiles {
        for ((s, v), m) in var.iter_mut().zip(p.values()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var.into_iter().map(|s| (s / k).sqrt()).collect();
    Ok((first.with_values(mean)?, first.with_values(std)?))
}

pub(crate) fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(dt: f64, f: impl Fn(f64) -> f64, n: usize) -> ScalarSeries {
        ScalarSeries::from_uniform(0.0, dt, (0..n).map(|i| f(i as f64 * dt)).collect()).unwrap()
    }

    #[test]
    fn derivative_of_line_is_constant() {
        let s = uniform(0.01, |t| 2.0 * t, 50);
        let d = derivative(&s).unwrap();
        assert!(d.values().iter().all(|v| (v - 2.0).abs() < 1e-9));
        assert_eq!(d.t(), s.t());
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let d = derivative(&uniform(0.01, |_| 0.3, 10)).unwrap();
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn derivative_is_exact_on_quadratic_interior() {
        let s = uniform(0.01, |t| t * t, 101);
        let d = derivative(&s).unwrap();
        for i in 1..100 {
            assert!((d.values()[i] - 2.0 * s.t()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_rejects_short_and_irregular() {
        assert!(matches!(
            derivative(&uniform(0.01, |t| t, 2)),
            Err(SignalError::TooShort { .. })
        ));
        let s = ScalarSeries::new(vec![0.0, 0.01, 0.02, 0.05], vec![0.0; 4]).unwrap();
        assert!(matches!(derivative(&s), Err(SignalError::NonUniform { .. })));
    }

    #[test]
    fn distances() {
        let traj = Trajectory::new(
            vec![
                Sample::new(0.0, [3.0, 4.0, 0.0]),
                Sample::new(0.01, [0.0, 0.0, 0.0]),
                Sample::new(0.02, [1.0, 1.0, 1.0]),
            ],
            TrialMeta::default(),
        )
        .unwrap();
        let d = distance_series(&traj, [0.0; 3]);
        assert_eq!(d.values()[0], 5.0);
        assert_eq!(d.values()[1], 0.0);
        let d = distance_series(&traj, [2.0, 2.0, 2.0]);
        assert!((d.values()[2] - 1.732_050_8).abs() < 1e-7);
    }

    #[test]
    fn resample_ramp_and_triangle() {
        let ramp = uniform(0.25, |t| t, 5);
        let r = resample(&ramp, 11).unwrap();
        for (i, v) in r.values().iter().enumerate() {
            assert!((v - i as f64 / 10.0).abs() < 1e-12);
        }
        let tri = ScalarSeries::from_uniform(0.0, 0.5, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(resample(&tri, 3).unwrap().values(), &[0.0, 1.0, 0.0]);
        assert!(matches!(
            resample(&tri, 1),
            Err(SignalError::ResampleCount(1))
        ));
    }

    #[test]
    fn resample_identity() {
        let s = uniform(1.0 / 120.0, |t| (7.0 * t).sin() + t * t, 97);
        let r = resample(&s, s.len()).unwrap();
        for (a, b) in r.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_examples() {
        let a = ScalarSeries::from_uniform(0.0, 1.0, vec![0.0; 3]).unwrap();
        let b = ScalarSeries::from_uniform(0.0, 1.0, vec![2.0; 3]).unwrap();
        let (m, s) = aggregate_profiles(&[a.clone(), b]).unwrap();
        assert_eq!(m.values(), &[1.0; 3]);
        assert_eq!(s.values(), &[1.0; 3]);
        let (m, s) = aggregate_profiles(std::slice::from_ref(&a)).unwrap();
        assert_eq!(m, a);
        assert_eq!(s.values(), &[0.0; 3]);
        let short = ScalarSeries::from_uniform(0.0, 1.0, vec![0.0; 2]).unwrap();
        assert!(aggregate_profiles(&[a, short]).is_err());
        assert_eq!(
            aggregate_profiles(&[]).unwrap_err(),
            SignalError::EmptyProfileSet
        );
    }
}
