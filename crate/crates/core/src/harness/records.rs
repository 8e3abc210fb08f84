//! Trial CSV: one row per sample, rows of a trial contiguous.
//!
//! ```text
//! trial_id,t,x,y,z,phase,cup,condition
//! empty-0000,0.0,0.012,-0.48,0.91,pre,empty,neu
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::signal::{Condition, Cup, MotionPhase, PhaseMarks, Sample, Trajectory, TrialMeta};

pub const TRIAL_CSV_HEADER: [&str; 8] = ["trial_id", "t", "x", "y", "z", "phase", "cup", "condition"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub phase: MotionPhase,
    pub cup: Cup,
    pub condition: Condition,
}

/// A trial left out of a loaded set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub trial_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LoadedTrials {
    /// Sorted by trial id.
    pub trials: Vec<Trajectory>,
    pub rejected: Vec<Rejection>,
}

fn build(id: &str, rows: &[TrialRecord]) -> Result<Trajectory, String> {
    let first = &rows[0];
    if let Some(r) = rows.iter().find(|r| r.cup != first.cup || r.condition != first.condition) {
        return Err(format!("cup/condition changes within the trial at t = {}", r.t));
    }
    let labels: Vec<MotionPhase> = rows.iter().map(|r| r.phase).collect();
    let phases = PhaseMarks::from_labels(&labels)?;
    let samples = rows.iter().map(|r| Sample::new(r.t, [r.x, r.y, r.z])).collect();
    let meta = TrialMeta {
        trial_id: id.to_string(),
        cup: first.cup,
        condition: first.condition,
        phases: Some(phases),
    };
    Trajectory::new(samples, meta).map_err(|e| e.to_string())
}

/// Read trials from CSV. Malformed rows abort with the line number; trials
/// that parse but break an invariant are rejected with a reason.
pub fn read_trials<R: Read>(input: R) -> Result<LoadedTrials, HarnessError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| HarnessError::parse(1, e))?.clone();
    let expected: Vec<&str> = TRIAL_CSV_HEADER.to_vec();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(HarnessError::Parse {
            line: 1,
            message: format!("header must be '{}'", expected.join(",")),
        });
    }
    let mut groups: BTreeMap<String, Vec<TrialRecord>> = BTreeMap::new();
    let mut split = Vec::new();
    let mut current: Option<String> = None;
    for row in reader.deserialize::<TrialRecord>() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            HarnessError::parse(line, e)
        })?;
        if current.as_deref() != Some(row.trial_id.as_str()) {
            if groups.contains_key(&row.trial_id) && !split.contains(&row.trial_id) {
                split.push(row.trial_id.clone());
            }
            current = Some(row.trial_id.clone());
        }
        groups.entry(row.trial_id.clone()).or_default().push(row);
    }
    let mut out = LoadedTrials::default();
    for (id, rows) in groups {
        if split.contains(&id) {
            out.rejected.push(Rejection {
                trial_id: id,
                reason: "rows are not contiguous".into(),
            });
            continue;
        }
        match build(&id, &rows) {
            Ok(t) => out.trials.push(t),
            Err(reason) => out.rejected.push(Rejection { trial_id: id, reason }),
        }
    }
    Ok(out)
}

pub fn load_trials(path: impl AsRef<Path>) -> Result<LoadedTrials, HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    read_trials(std::io::BufReader::new(file))
}

/// Write trials in the given order. Every trial needs phase marks.
pub fn write_trials<W: Write>(trials: &[Trajectory], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for traj in trials {
        let meta = traj.meta();
        let labels = traj.phase_labels().ok_or_else(|| HarnessError::Input(format!("trial {} has no phase marks", meta.trial_id)))?;
        for (s, phase) in traj.samples().iter().zip(labels) {
            w.serialize(TrialRecord {
                trial_id: meta.trial_id.clone(),
                t: s.t,
                x: s.pos[0],
                y: s.pos[1],
                z: s.pos[2],
                phase,
                cup: meta.cup,
                condition: meta.condition,
            })?;
        }
    }
    w.flush().map_err(|e| HarnessError::Io {
        path: "<csv>".into(),
        source: e,
    })?;
    Ok(())
}

pub fn save_trials(trials: &[Trajectory], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    write_trials(trials, std::io::BufWriter::new(file))
}
