use std::f64::consts::{PI, SQRT_2};

use super::{ScalarSeries, SignalError};

/// Minimum input length accepted by [`lowpass_butter2`]: three times the
/// filter warm-up (three coefficients per section).
pub const MIN_FILTER_INPUT: usize = 9;

/// Second-order Butterworth low-pass specification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    cutoff_hz: f64,
    sample_rate_hz: f64,
}

impl FilterSpec {
    pub const ORDER: usize = 2;

    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, SignalError> {
        let nyquist_hz = sample_rate_hz / 2.0;
        if !(cutoff_hz > 0.0 && cutoff_hz < nyquist_hz && nyquist_hz.is_finite()) {
            return Err(SignalError::InvalidFilterSpec {
                cutoff_hz,
                nyquist_hz,
            });
        }
        Ok(Self {
            cutoff_hz,
            sample_rate_hz,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Analytic magnitude of the analog prototype, |H| = 1/sqrt(1 + (f/fc)^4).
    pub fn analog_magnitude(&self, f_hz: f64) -> f64 {
        1.0 / (1.0 + (f_hz / self.cutoff_hz).powi(4)).sqrt()
    }
}

/// Biquad section in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Biquad {
    /// Bilinear transform with the cutoff pre-warped.
    pub fn butterworth(spec: &FilterSpec) -> Self {
        let k = (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
        let b0 = k2 * norm;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
            z: [0.0; 2],
        }
    }

    pub fn coefficients(&self) -> ([f64; 3], [f64; 2]) {
        (self.b, self.a)
    }

    /// Gain at z = 1.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1])
    }

    /// Digital magnitude response at frequency `f_hz`.
    pub fn magnitude(&self, f_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let (c1, s1, c2, s2) = (w.cos(), -w.sin(), (2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, self.b[1] * s1 + self.b[2] * s2);
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    /// Put the state at the steady-state response to a constant input `x0`.
    pub fn settle(&mut self, x0: f64) {
        let y0 = x0 * self.dc_gain();
        self.z = [y0 - self.b[0] * x0, self.b[2] * x0 - self.a[1] * y0];
    }

    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    fn run(&self, input: impl Iterator<Item = f64>, first: f64) -> Vec<f64> {
        let mut f = *self;
        f.settle(first);
        input.map(|x| f.process(x)).collect()
    }
}

/// Second-order Butterworth low-pass. Causal unless `zero_phase`, in which
/// case the filter runs forward then backward.
pub fn lowpass_butter2(
    series: &ScalarSeries,
    spec: &FilterSpec,
    zero_phase: bool,
) -> Result<ScalarSeries, SignalError> {
    let n = series.len();
    if n < MIN_FILTER_INPUT {
        return Err(SignalError::TooShort {
            len: n,
            min: MIN_FILTER_INPUT,
        });
    }
    series.uniform_dt()?;
    let biquad = Biquad::butterworth(spec);
    let v = series.values();
    let mut out = biquad.run(v.iter().copied(), v[0]);
    if zero_phase {
        let last = out[n - 1];
        out = biquad.run(out.iter().rev().copied(), last);
        out.reverse();
    }
    series.with_values(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 120.0;

    fn sine(f: f64, n: usize) -> ScalarSeries {
        let v = (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect();
        ScalarSeries::from_uniform(0.0, 1.0 / FS, v).unwrap()
    }

    // Least-squares amplitude at frequency f over the last 1200 samples
    // (a whole number of periods for the test frequencies).
    fn steady_amplitude(out: &ScalarSeries, f: f64) -> f64 {
        let v = out.values();
        let start = v.len() - 1200;
        let (mut s, mut c) = (0.0, 0.0);
        for (i, y) in v.iter().enumerate().skip(start) {
            let w = 2.0 * PI * f * i as f64 / FS;
            s += y * w.sin();
            c += y * w.cos();
        }
        2.0 * s.hypot(c) / 1200.0
    }

    #[test]
    fn spec_validation() {
        assert!(FilterSpec::new(8.0, 120.0).is_ok());
        assert!(FilterSpec::new(60.0, 120.0).is_err());
        assert!(FilterSpec::new(0.0, 120.0).is_err());
    }

    #[test]
    fn constant_passes_unchanged() {
        let spec = FilterSpec::new(8.0, FS).unwrap();
        let s = ScalarSeries::from_uniform(0.0, 1.0 / FS, vec![0.7; 50]).unwrap();
        for zp in [false, true] {
            let out = lowpass_butter2(&s, &spec, zp).unwrap();
            assert!(out.values().iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn cutoff_and_stopband_amplitudes() {
        let spec = FilterSpec::new(8.0, FS).unwrap();
        let out = lowpass_butter2(&sine(8.0, 2400), &spec, false).unwrap();
        assert!((steady_amplitude(&out, 8.0) - 0.5_f64.sqrt()).abs() < 1e-6);
        let out = lowpass_butter2(&sine(40.0, 2400), &spec, false).unwrap();
        assert!(steady_amplitude(&out, 40.0) <= 0.04);
    }

    #[test]
    fn short_input_rejected() {
        let spec = FilterSpec::new(8.0, FS).unwrap();
        let s = ScalarSeries::from_uniform(0.0, 1.0 / FS, vec![1.0; 8]).unwrap();
        assert!(matches!(
            lowpass_butter2(&s, &spec, false),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn coefficients_match_closed_form_magnitude_at_cutoff() {
        let spec = FilterSpec::new(8.0, FS).unwrap();
        let bq = Biquad::butterworth(&spec);
        assert!((bq.magnitude(8.0, FS) - 0.5_f64.sqrt()).abs() < 1e-12);
        assert!((bq.dc_gain() - 1.0).abs() < 1e-12);
    }
}
