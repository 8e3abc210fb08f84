//! Line-oriented model file.
//!
//! ```text
//! carefulness-model v1
//! model not_careful
//! n_points <count>
//! mean <x> <xdot>
//! covariance <xx> <x_xdot> <xdot_x> <xdot_xdot>
//! eigenvalues <l1> <l2>
//! eigenvector <v_xdot> <v_x>
//! slope <Y>
//! end
//! model careful
//! ...
//! end
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`. On load the eigen-decomposition is recomputed from the covariance
//! and must agree with the stored values within 1e-6.

use std::fmt::Write as _;
use std::path::Path;

use super::{BehaviorError, BehaviorModel, ModelPair};
use crate::synth::CarefulnessLabel;

pub const MODEL_FORMAT_HEADER: &str = "carefulness-model v1";
const VALIDATION_TOL: f64 = 1e-6;

pub fn render_model(pair: &ModelPair) -> String {
    let mut s = String::new();
    writeln!(s, "{MODEL_FORMAT_HEADER}").unwrap();
    for m in [&pair.not_careful, &pair.careful] {
        writeln!(s, "model {}", m.label).unwrap();
        writeln!(s, "n_points {}", m.n_points).unwrap();
        writeln!(s, "mean {:?} {:?}", m.mean[0], m.mean[1]).unwrap();
        writeln!(
            s,
            "covariance {:?} {:?} {:?} {:?}",
            m.cov[0][0], m.cov[0][1], m.cov[1][0], m.cov[1][1]
        )
        .unwrap();
        writeln!(s, "eigenvalues {:?} {:?}", m.eigenvalues[0], m.eigenvalues[1]).unwrap();
        writeln!(s, "eigenvector {:?} {:?}", m.eigenvector[0], m.eigenvector[1]).unwrap();
        writeln!(s, "slope {:?}", m.slope).unwrap();
        writeln!(s, "end").unwrap();
    }
    s
}

pub fn save_model(pair: &ModelPair, path: impl AsRef<Path>) -> Result<(), BehaviorError> {
    std::fs::write(path, render_model(pair))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelPair, BehaviorError> {
    parse_model(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line split into key and numeric-or-word fields.
    fn field(&mut self, key: &str, count: usize) -> Result<(usize, Vec<&'a str>), BehaviorError> {
        loop {
            let (i, line) = self
                .inner
                .next()
                .ok_or_else(|| BehaviorError::Format(format!("unexpected end of file, expected '{key}'")))?;
            let mut parts = line.split_whitespace();
            let Some(first) = parts.next() else { continue };
            let rest: Vec<&str> = parts.collect();
            if first != key || rest.len() != count {
                return Err(BehaviorError::Format(format!(
                    "line {}: expected '{key}' with {count} value(s), found '{}'",
                    i + 1,
                    line.trim()
                )));
            }
            return Ok((i + 1, rest));
        }
    }

    fn floats<const N: usize>(&mut self, key: &str) -> Result<[f64; N], BehaviorError> {
        let (line, parts) = self.field(key, N)?;
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = p
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| BehaviorError::Format(format!("line {line}: bad number '{p}'")))?;
        }
        Ok(out)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALIDATION_TOL * a.abs().max(b.abs()).max(1.0)
}

fn parse_block(lines: &mut Lines<'_>, expected: CarefulnessLabel) -> Result<BehaviorModel, BehaviorError> {
    let (line, label) = lines.field("model", 1)?;
    if label[0] != expected.as_str() {
        return Err(BehaviorError::Format(format!(
            "line {line}: expected model '{expected}', found '{}'",
            label[0]
        )));
    }
    let (line, n) = lines.field("n_points", 1)?;
    let n_points = n[0]
        .parse::<usize>()
        .map_err(|_| BehaviorError::Format(format!("line {line}: bad count '{}'", n[0])))?;
    let mean = lines.floats::<2>("mean")?;
    let c = lines.floats::<4>("covariance")?;
    let eigenvalues = lines.floats::<2>("eigenvalues")?;
    let eigenvector = lines.floats::<2>("eigenvector")?;
    let [slope] = lines.floats::<1>("slope")?;
    lines.field("end", 0)?;

    if !close(c[1], c[2]) {
        return Err(BehaviorError::Validation(format!("{expected}: covariance is not symmetric")));
    }
    let cov = [[c[0], c[1]], [c[2], c[3]]];
    let fresh = BehaviorModel::from_moments(expected, n_points, mean, cov)?;
    let checks = [
        ("eigenvalue 1", eigenvalues[0], fresh.eigenvalues[0]),
        ("eigenvalue 2", eigenvalues[1], fresh.eigenvalues[1]),
        ("v_xdot", eigenvector[0], fresh.eigenvector[0]),
        ("v_x", eigenvector[1], fresh.eigenvector[1]),
        ("slope", slope, fresh.slope),
    ];
    for (what, stored, recomputed) in checks {
        if !close(stored, recomputed) {
            return Err(BehaviorError::Validation(format!(
                "{expected}: stored {what} {stored} does not match recomputed {recomputed}"
            )));
        }
    }
    Ok(BehaviorModel {
        label: expected,
        n_points,
        mean,
        cov,
        eigenvalues,
        eigenvector,
        slope,
    })
}

pub fn parse_model(text: &str) -> Result<ModelPair, BehaviorError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let header = lines
        .inner
        .by_ref()
        .map(|(_, l)| l.trim())
        .find(|l| !l.is_empty())
        .ok_or_else(|| BehaviorError::Format("empty model file".into()))?;
    if header != MODEL_FORMAT_HEADER {
        return Err(BehaviorError::Format(format!(
            "unsupported header '{header}', expected '{MODEL_FORMAT_HEADER}'"
        )));
    }
    let nc = parse_block(&mut lines, CarefulnessLabel::NotCareful)?;
    let c = parse_block(&mut lines, CarefulnessLabel::Careful)?;
    if let Some((i, l)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
        return Err(BehaviorError::Format(format!("line {}: trailing content '{}'", i + 1, l.trim())));
    }
    ModelPair::new(nc, c)
}
