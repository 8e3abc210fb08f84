use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::SimReport;
use super::{write_file, HarnessError};
use crate::behavior::{trial_points, FitOptions, ModelPair};
use crate::classifier::{nearest_rank, EvalReport, TrialOutcome, EARLY_LEAD};
use crate::signal::{
    aggregate_profiles, derivative, lowpass_butter2, norm3, resample, Condition, Cup, FilterSpec, MotionPhase,
    ScalarSeries, Trajectory,
};
use crate::synth::CarefulnessLabel;

/// Points per normalized velocity profile.
pub const PROFILE_POINTS: usize = 101;
/// Cutoff used to smooth plotted velocities, Hz.
const PROFILE_CUTOFF_HZ: f64 = 8.0;

pub struct ReportInputs<'a> {
    pub train: &'a [Trajectory],
    pub eval: &'a [Trajectory],
    pub fit: &'a FitOptions,
    pub models: &'a ModelPair,
    pub carry: &'a EvalReport,
    pub reach: Option<&'a EvalReport>,
    pub sim: &'a SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub label: CarefulnessLabel,
    pub n: usize,
    pub correct: usize,
    pub wrong: usize,
    pub undecided: usize,
    pub accuracy: f64,
    pub p97_decision_step: Option<usize>,
    pub mean_decision_step: Option<f64>,
    pub early_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: MotionPhase,
    pub labels: Vec<LabelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusySummary {
    pub condition: Condition,
    pub cup: Cup,
    pub n: usize,
    pub mean_busy_s: f64,
    pub spills: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetTimeSummary {
    pub condition: Condition,
    pub blocks: usize,
    pub mean_total_s: f64,
    pub mean_robot_s: f64,
    pub mean_net_s: f64,
    /// Sample std (n − 1); zero for a single block.
    pub std_net_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Y for not careful and careful.
    pub slopes: [f64; 2],
    pub classification: Vec<PhaseSummary>,
    pub busy_time: Vec<BusySummary>,
    pub net_time: Vec<NetTimeSummary>,
}

fn summarize_label(label: CarefulnessLabel, trials: &[TrialOutcome]) -> LabelSummary {
    let mine: Vec<&TrialOutcome> = trials.iter().filter(|t| CarefulnessLabel::from(t.cup) == label).collect();
    let correct: Vec<&&TrialOutcome> = mine.iter().filter(|t| t.decision == Some(label)).collect();
    let undecided = mine.iter().filter(|t| t.decision.is_none()).count();
    let steps: Vec<usize> = correct.iter().filter_map(|t| t.decision_step).collect();
    let early = correct
        .iter()
        .filter(|t| t.lead_time.is_some_and(|l| l >= EARLY_LEAD - 1e-9))
        .count();
    let n = mine.len();
    LabelSummary {
        label,
        n,
        correct: correct.len(),
        wrong: n - correct.len() - undecided,
        undecided,
        accuracy: if n == 0 { 0.0 } else { correct.len() as f64 / n as f64 },
        p97_decision_step: nearest_rank(&steps, 97.0),
        mean_decision_step: (!steps.is_empty()).then(|| steps.iter().sum::<usize>() as f64 / steps.len() as f64),
        early_fraction: (!correct.is_empty()).then(|| early as f64 / correct.len() as f64),
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Aggregate tables, recomputed from the per-trial outputs.
pub fn build_report(inputs: &ReportInputs<'_>) -> Report {
    let mut classification = vec![];
    for r in std::iter::once(inputs.carry).chain(inputs.reach) {
        classification.push(PhaseSummary {
            phase: r.phase,
            labels: CarefulnessLabel::ALL.into_iter().map(|l| summarize_label(l, &r.trials)).collect(),
        });
    }
    let mut busy_time = vec![];
    let mut net_time = vec![];
    for condition in [Condition::Neu, Condition::Exp] {
        let blocks: Vec<_> = inputs.sim.blocks.iter().filter(|b| b.metrics.condition == condition).collect();
        for cup in [Cup::Empty, Cup::Full] {
            let trials: Vec<_> = blocks.iter().flat_map(|b| &b.metrics.trials).filter(|t| t.cup == cup).collect();
            let busy: Vec<f64> = trials.iter().map(|t| t.robot_busy_time).collect();
            busy_time.push(BusySummary {
                condition,
                cup,
                n: trials.len(),
                mean_busy_s: mean(&busy),
                spills: trials.iter().filter(|t| t.spill).count(),
            });
        }
        let net: Vec<f64> = blocks.iter().map(|b| b.metrics.net_human_time).collect();
        let m = mean(&net);
        let std = if net.len() > 1 {
            (net.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (net.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        net_time.push(NetTimeSummary {
            condition,
            blocks: blocks.len(),
            mean_total_s: mean(&blocks.iter().map(|b| b.metrics.total_duration).collect::<Vec<_>>()),
            mean_robot_s: mean(&blocks.iter().map(|b| b.metrics.robot_busy_time).collect::<Vec<_>>()),
            mean_net_s: m,
            std_net_s: std,
        });
    }
    Report {
        slopes: inputs.models.slopes(),
        classification,
        busy_time,
        net_time,
    }
}

/// Speed norm of the velocity vector, each component smoothed forward and
/// backward. Positions are differentiated unfiltered.
fn smoothed_speed(traj: &Trajectory) -> Result<ScalarSeries, HarnessError> {
    let s = traj.samples();
    let t: Vec<f64> = s.iter().map(|x| x.t).collect();
    let mut axes = Vec::with_capacity(3);
    for k in 0..3 {
        let pos = ScalarSeries::new(t.clone(), s.iter().map(|x| x.pos[k]).collect())?;
        let vel = derivative(&pos)?;
        let spec = FilterSpec::new(PROFILE_CUTOFF_HZ, 1.0 / vel.uniform_dt()?)?;
        axes.push(lowpass_butter2(&vel, &spec, true)?.into_values());
    }
    let speed = (0..s.len()).map(|i| norm3([axes[0][i], axes[1][i], axes[2][i]])).collect();
    Ok(ScalarSeries::new(t, speed)?)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| HarnessError::Input(e.to_string()))
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Mean ± std speed over normalized time per label and phase.
fn velocity_rows(eval: &[Trajectory]) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut rows = vec![];
    for phase in [MotionPhase::Reach, MotionPhase::Carry] {
        for label in CarefulnessLabel::ALL {
            let mut profiles = vec![];
            for traj in eval.iter().filter(|t| CarefulnessLabel::from(t.meta().cup) == label) {
                let Some(r) = traj.phase_range(phase).filter(|r| r.len() >= 2) else { continue };
                let speed = smoothed_speed(traj)?;
                let part = speed.slice(r.start, r.end)?;
                profiles.push(resample(&part, PROFILE_POINTS)?);
            }
            if profiles.is_empty() {
                continue;
            }
            let (m, s) = aggregate_profiles(&profiles)?;
            for i in 0..PROFILE_POINTS {
                rows.push(vec![
                    label.to_string(),
                    phase.to_string(),
                    i.to_string(),
                    num(i as f64 / (PROFILE_POINTS - 1) as f64),
                    num(m.values()[i]),
                    num(s.values()[i]),
                    profiles.len().to_string(),
                ]);
            }
        }
    }
    Ok(rows)
}

fn summary_text(r: &Report) -> String {
    let mut s = String::new();
    writeln!(s, "slopes: not_careful {:.4}, careful {:.4}", r.slopes[0], r.slopes[1]).unwrap();
    writeln!(s).unwrap();
    writeln!(s, "{:<8} {:<12} {:>5} {:>8} {:>6} {:>9} {:>9} {:>6}", "phase", "label", "n", "accuracy", "wrong", "undecided", "p97_step", "early").unwrap();
    for p in &r.classification {
        for l in &p.labels {
            writeln!(
                s,
                "{:<8} {:<12} {:>5} {:>8.3} {:>6} {:>9} {:>9} {:>6}",
                p.phase.to_string(),
                l.label.to_string(),
                l.n,
                l.accuracy,
                l.wrong,
                l.undecided,
                opt(l.p97_decision_step),
                l.early_fraction.map(|e| format!("{e:.3}")).unwrap_or_default(),
            )
            .unwrap();
        }
    }
    writeln!(s).unwrap();
    writeln!(s, "{:<9} {:<6} {:>4} {:>10} {:>6}", "condition", "cup", "n", "busy_s", "spills").unwrap();
    for b in &r.busy_time {
        writeln!(s, "{:<9} {:<6} {:>4} {:>10.3} {:>6}", b.condition.to_string(), b.cup.to_string(), b.n, b.mean_busy_s, b.spills).unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "{:<9} {:>6} {:>9} {:>9} {:>9} {:>8}", "condition", "blocks", "total_s", "robot_s", "net_s", "net_std").unwrap();
    for n in &r.net_time {
        writeln!(
            s,
            "{:<9} {:>6} {:>9.3} {:>9.3} {:>9.3} {:>8.3}",
            n.condition.to_string(),
            n.blocks,
            n.mean_total_s,
            n.mean_robot_s,
            n.mean_net_s,
            n.std_net_s
        )
        .unwrap();
    }
    s
}

/// Write `summary.json`, `summary.txt` and the plot-ready CSVs.
pub fn write_report(inputs: &ReportInputs<'_>, dir: &Path) -> Result<Report, HarnessError> {
    let report = build_report(inputs);
    write_file(&dir.join("summary.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    write_file(&dir.join("summary.txt"), summary_text(&report))?;

    let fig3 = csv_bytes(&["label", "phase", "i", "tau", "mean_speed", "std_speed", "n"], velocity_rows(inputs.eval)?)?;
    write_file(&dir.join("fig3_velocity.csv"), fig3)?;

    let mut points = vec![];
    for traj in inputs.train {
        let label = CarefulnessLabel::from(traj.meta().cup);
        for p in trial_points(traj, inputs.fit)? {
            points.push(vec![label.to_string(), traj.meta().trial_id.clone(), num(p.x), num(p.xdot)]);
        }
    }
    write_file(&dir.join("fig4_phase_space.csv"), csv_bytes(&["label", "trial_id", "x", "xdot"], points)?)?;
    let models = CarefulnessLabel::ALL.into_iter().map(|l| {
        let m = inputs.models.get(l);
        vec![
            l.to_string(),
            m.n_points.to_string(),
            num(m.mean[0]),
            num(m.mean[1]),
            num(m.eigenvalues[0]),
            num(m.eigenvalues[1]),
            num(m.eigenvector[0]),
            num(m.eigenvector[1]),
            num(m.slope),
        ]
    });
    let header = ["label", "n_points", "mean_x", "mean_xdot", "eig1", "eig2", "v_xdot", "v_x", "slope"];
    write_file(&dir.join("fig4_models.csv"), csv_bytes(&header, models)?)?;

    let mut curves = vec![];
    for r in std::iter::once(inputs.carry).chain(inputs.reach) {
        for stats in &r.labels {
            for c in &stats.decided_curve {
                curves.push(vec![r.phase.to_string(), stats.label.to_string(), c.step.to_string(), num(c.fraction), num(c.std_err)]);
            }
        }
    }
    write_file(&dir.join("fig5_decisions.csv"), csv_bytes(&["phase", "label", "step", "fraction", "std_err"], curves)?)?;

    let blocks = inputs.sim.blocks.iter().map(|b| {
        vec![
            b.block.to_string(),
            b.metrics.condition.to_string(),
            num(b.metrics.total_duration),
            num(b.metrics.robot_busy_time),
            num(b.metrics.net_human_time),
        ]
    });
    write_file(&dir.join("fig7_net_time.csv"), csv_bytes(&["block", "condition", "total_s", "robot_s", "net_s"], blocks)?)?;
    Ok(report)
}
