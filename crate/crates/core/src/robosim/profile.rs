use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs at least 2 samples and dt > 0")]
    TooShort,
    #[error("profile speed at index {0} is negative or non-finite")]
    BadValue(usize),
    #[error("profile must start and end at rest (|v| <= 1e-6), got {first} and {last}")]
    NotAtRest { first: f64, last: f64 },
    #[error("profile has zero displacement")]
    ZeroDisplacement,
}

/// Tolerance for the rest condition at both ends of a profile.
pub const REST_TOLERANCE: f64 = 1e-6;

/// Uniformly sampled speed norm, starting and ending at rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    dt: f64,
    values: Vec<f64>,
}

impl VelocityProfile {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.len() < 2 || !(dt > 0.0 && dt.is_finite()) {
            return Err(ProfileError::TooShort);
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ProfileError::BadValue(i));
        }
        let (first, last) = (values[0], values[values.len() - 1]);
        if first > REST_TOLERANCE || last > REST_TOLERANCE {
            return Err(ProfileError::NotAtRest { first, last });
        }
        Ok(Self { dt, values })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoidal integral of the speed: the distance covered.
    pub fn displacement(&self) -> f64 {
        let v = &self.values;
        let inner: f64 = v[1..v.len() - 1].iter().sum();
        self.dt * (inner + 0.5 * (v[0] + v[v.len() - 1]))
    }

    /// Linearly interpolated speed at time `t`; zero outside the profile.
    pub fn speed_at(&self, t: f64) -> f64 {
        if !(t > 0.0) || t >= self.duration() {
            return 0.0;
        }
        let u = t / self.dt;
        let i = (u.floor() as usize).min(self.values.len() - 2);
        let w = u - i as f64;
        self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Same speeds played over a time axis stretched so the displacement
    /// equals `length`.
    pub fn rescaled_to(&self, length: f64) -> Result<Self, ProfileError> {
        let raw = self.displacement();
        if !(raw > 0.0) {
            return Err(ProfileError::ZeroDisplacement);
        }
        Ok(Self {
            dt: self.dt * length / raw,
            values: self.values.clone(),
        })
    }
}
