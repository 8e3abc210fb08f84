use std::path::Path;
use std::process::{Command, Output};

use carefulness::classifier::EvalReport;
use carefulness::harness::{load_trials, Report, RunConfig, SimReport};
use carefulness::signal::{Condition, Cup};
use carefulness::synth::{synth_dataset, CarefulnessLabel, SynthConfig};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carefulness")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = cli(&["synth", "--n", "5", "--seed", "9", "--out", path(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    cli(&["synth", "--n", "5", "--seed", "10", "--out", path(&c)]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn csv_round_trip_preserves_samples() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.csv");
    assert!(cli(&["synth", "--n", "3", "--seed", "4", "--out", path(&file)]).status.success());
    let loaded = load_trials(&file).unwrap();
    assert!(loaded.rejected.is_empty());
    let expected = synth_dataset(3, &SynthConfig::default(), 4).unwrap();
    assert_eq!(loaded.trials.len(), expected.len());
    for (got, want) in loaded.trials.iter().zip(&expected) {
        assert_eq!(got.meta().trial_id, want.meta().trial_id);
        assert_eq!(got.meta().cup, want.meta().cup);
        assert_eq!(got.phase_labels(), want.phase_labels());
        assert_eq!(got.len(), want.len());
        for (g, w) in got.samples().iter().zip(want.samples()) {
            assert!((g.t - w.t).abs() <= 1e-9);
            for k in 0..3 {
                assert!((g.pos[k] - w.pos[k]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn fit_without_both_labels_is_a_model_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(cli(&["synth", "--n", "3", "--seed", "1", "--out", path(&data)]).status.success());
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let full_only: Vec<&str> = std::iter::once(header).chain(lines.filter(|l| l.starts_with("full-"))).collect();
    std::fs::write(&data, full_only.join("\n") + "\n").unwrap();

    let o = cli(&["fit", "--data", path(&data), "--out", path(&dir.path().join("m.txt"))]);
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("not_careful"), "{err}");
    assert!(!dir.path().join("m.txt").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(cli(&["fit"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cli(&["synth", "--n", "0", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn input_errors_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "trial_id,t,x,y,z,phase,cup,condition\nempty-0000,zero,0,0,0,carry,empty,none\n").unwrap();
    let o = cli(&["fit", "--data", path(&bad), "--out", path(&dir.path().join("m.txt"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let missing = dir.path().join("missing.csv");
    let o = cli(&["fit", "--data", path(&missing), "--out", path(&dir.path().join("m.txt"))]);
    assert_eq!(o.status.code(), Some(6));

    let garbage_model = dir.path().join("model.txt");
    std::fs::write(&garbage_model, "not a model\n").unwrap();
    let data = dir.path().join("d.csv");
    assert!(cli(&["synth", "--n", "2", "--out", path(&data)]).status.success());
    let o = cli(&["classify", "--data", path(&data), "--model", path(&garbage_model), "--out-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(4));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 1, "no_such_field": true}"#).unwrap();
    let o = cli(&["--config", path(&cfg), "synth", "--out", path(&data)]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::write(&cfg, r#"{"classifier": {"epsilon": -1.0}}"#).unwrap();
    let o = cli(&["--config", path(&cfg), "synth", "--out", path(&data)]);
    assert_eq!(o.status.code(), Some(2));
}

/// Nearest rank by scanning: the smallest sorted value covering 97 % of the data.
fn p97(mut v: Vec<usize>) -> Option<usize> {
    v.sort();
    let n = v.len();
    (1..=n).find(|k| 100 * k >= 97 * n).map(|k| v[k - 1])
}

#[test]
fn pipeline_report_matches_brute_force() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        counts: carefulness::harness::Counts {
            train_per_label: 30,
            eval_per_label: 40,
            blocks: 2,
        },
        ..Default::default()
    };
    let cfg_file = dir.path().join("in.json");
    std::fs::write(&cfg_file, cfg.to_json()).unwrap();
    let root = dir.path().join("run");
    let o = cli(&["--config", path(&cfg_file), "pipeline", "--out-dir", path(&root)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("p97"), "{stdout}");

    let report: Report = read_json(&root.join("report/summary.json"));
    let carry: EvalReport = read_json(&root.join("classify-carry/report.json"));
    let sim: SimReport = read_json(&root.join("simulate.json"));

    let summary = &report.classification[0];
    for s in &summary.labels {
        let mine: Vec<_> = carry.trials.iter().filter(|t| CarefulnessLabel::from(t.cup) == s.label).collect();
        let correct: Vec<_> = mine.iter().filter(|t| t.decision == Some(s.label)).collect();
        assert_eq!(s.n, mine.len());
        assert_eq!(s.n, 40);
        assert_eq!(s.correct, correct.len());
        assert_eq!(s.undecided, mine.iter().filter(|t| t.decision.is_none()).count());
        assert_eq!(s.accuracy, correct.len() as f64 / mine.len() as f64);
        assert_eq!(s.p97_decision_step, p97(correct.iter().filter_map(|t| t.decision_step).collect()));
        let early = correct.iter().filter(|t| t.lead_time.unwrap() >= 0.4 - 1e-9).count();
        let expected_early = (!correct.is_empty()).then(|| early as f64 / correct.len() as f64);
        assert_eq!(s.early_fraction, expected_early);
    }

    for b in &report.busy_time {
        let busy: Vec<f64> = sim
            .blocks
            .iter()
            .filter(|x| x.metrics.condition == b.condition)
            .flat_map(|x| &x.metrics.trials)
            .filter(|t| t.cup == b.cup)
            .map(|t| t.busy_ticks as f64 / 120.0)
            .collect();
        assert_eq!(b.n, busy.len());
        assert_eq!(b.n, 4);
        let m = busy.iter().sum::<f64>() / busy.len() as f64;
        assert!((b.mean_busy_s - m).abs() <= 1e-12);
    }

    for n in &report.net_time {
        let net: Vec<f64> = sim
            .blocks
            .iter()
            .filter(|x| x.metrics.condition == n.condition)
            .map(|x| {
                let busy: u64 = x.metrics.trials.iter().map(|t| t.busy_ticks).sum();
                (x.metrics.total_ticks - busy) as f64 / 120.0
            })
            .collect();
        assert_eq!(n.blocks, 2);
        let m = net.iter().sum::<f64>() / 2.0;
        let sd = ((net[0] - m).powi(2) + (net[1] - m).powi(2)).sqrt();
        assert!((n.mean_net_s - m).abs() <= 1e-9);
        assert!((n.std_net_s - sd).abs() <= 1e-9);
    }
    let neu = report.net_time.iter().find(|n| n.condition == Condition::Neu).unwrap();
    let exp = report.net_time.iter().find(|n| n.condition == Condition::Exp).unwrap();
    assert_eq!(neu.mean_net_s, exp.mean_net_s);
    assert!(report.busy_time.iter().any(|b| b.cup == Cup::Full && b.spills == 0));

    // Regenerating the report from the saved files reproduces it.
    let again = dir.path().join("again");
    let o = cli(&["report", "--dir", path(&root), "--out-dir", path(&again)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.json", "summary.txt", "fig5_decisions.csv", "fig7_net_time.csv"] {
        assert_eq!(std::fs::read(root.join("report").join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn simulate_writes_metrics_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let traces = dir.path().join("traces");
    let o = cli(&["simulate", "--blocks", "1", "--seed", "3", "--out", path(&out), "--traces", path(&traces)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sim: SimReport = read_json(&out);
    assert_eq!(sim.blocks.len(), 2);
    assert!(dir.path().join("sim.csv").exists());
    assert_eq!(std::fs::read_dir(&traces).unwrap().count(), 8);
}
