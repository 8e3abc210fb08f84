//! Command-line interface. Flags override values from `--config`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::{
    exit, load_trials, read_file, run_classify, run_fit, run_pipeline, run_simulation, save_trials, write_eval,
    write_file, write_report, write_sim_trials_csv, HarnessError, PipelinePaths, ReportInputs, RunConfig, SimReport,
};
use crate::behavior::{load_model, save_model};
use crate::classifier::EvalReport;
use crate::robosim::{run_trial, TraceSample};
use crate::signal::{MotionPhase, Trajectory};
use crate::synth::synth_dataset;

#[derive(Debug, Parser)]
#[command(name = "carefulness", version, about = "Carefulness classification and handover simulation")]
pub struct Cli {
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PhaseArg {
    Carry,
    Reach,
}

impl From<PhaseArg> for MotionPhase {
    fn from(p: PhaseArg) -> Self {
        match p {
            PhaseArg::Carry => MotionPhase::Carry,
            PhaseArg::Reach => MotionPhase::Reach,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset of empty- and full-cup trials as CSV.
    Synth {
        /// Trials per label [default: counts.train_per_label = 100].
        #[arg(long)]
        n: Option<usize>,
        /// Dataset seed [default: config seed = 1].
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Fit the two behavior models and write the model file.
    Fit {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Classify every trial online; writes report.json and belief traces.
    Classify {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value = "carry")]
        phase: PhaseArg,
        /// Skip the per-trial trace CSVs.
        #[arg(long)]
        no_traces: bool,
    },
    /// Simulate handover blocks under both robot conditions.
    Simulate {
        /// Metrics JSON; a per-trial CSV is written next to it.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Attach a classifier with these models.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Blocks per condition [default: counts.blocks = 3].
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write robot state traces here.
        #[arg(long, value_name = "DIR")]
        traces: Option<PathBuf>,
    },
    /// Aggregate tables and plot-ready CSVs from a pipeline directory.
    Report {
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
        /// [default: <dir>/report]
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// synth → fit → classify → simulate → report.
    Pipeline {
        /// [default: config output_dir = out]
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn config(path: Option<&Path>) -> Result<RunConfig, HarnessError> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn trials(path: &Path) -> Result<Vec<Trajectory>, HarnessError> {
    let loaded = load_trials(path)?;
    for r in &loaded.rejected {
        eprintln!("warning: rejected trial {}: {}", r.trial_id, r.reason);
    }
    if loaded.trials.is_empty() {
        return Err(HarnessError::Input(format!("{}: no valid trials", path.display())));
    }
    Ok(loaded.trials)
}

fn robot_trace_csv(trace: &[TraceSample]) -> Result<Vec<u8>, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tick", "t", "phase", "x", "y", "z", "vx", "vy", "vz", "holding"])?;
    for s in trace {
        let p = s.state.pos;
        let v = s.state.vel;
        let mut row = vec![s.tick.to_string(), format!("{:?}", s.state.t), s.phase.as_str().to_string()];
        row.extend(p.iter().chain(&v).map(|x| format!("{x:?}")));
        row.push(s.state.holding.map(|c| c.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| HarnessError::Input(e.to_string()))
}

fn write_robot_traces(cfg: &RunConfig, sim: &SimReport, dir: &Path) -> Result<(), HarnessError> {
    for b in &sim.blocks {
        let plan = super::block_plan(cfg, b.block)?;
        let condition = b.metrics.condition;
        for bt in &plan {
            let cup = bt.human.meta().cup;
            let run = run_trial(cup, condition, &bt.human, &bt.geometry, cfg.controllers.get(condition), &cfg.sim, None)?;
            let name = format!("{}-{condition}.csv", bt.human.meta().trial_id);
            write_file(&dir.join(name), robot_trace_csv(&run.trace)?)?;
        }
    }
    Ok(())
}

fn json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    serde_json::from_str(&read_file(path)?).map_err(|e| HarnessError::Parse {
        line: e.line() as u64,
        message: format!("{}: {e}", path.display()),
    })
}

pub fn run(cli: Cli) -> Result<(), HarnessError> {
    let mut cfg = config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { n, seed, out } => {
            let n = n.unwrap_or(cfg.counts.train_per_label);
            if n == 0 {
                return Err(HarnessError::Usage("--n must be positive".into()));
            }
            let data = synth_dataset(n, &cfg.synth, seed.unwrap_or(cfg.seed))?;
            save_trials(&data, &out)?;
        }
        Command::Fit { data, out } => {
            let models = run_fit(&trials(&data)?, &cfg)?;
            save_model(&models, &out)?;
        }
        Command::Classify {
            data,
            model,
            out_dir,
            phase,
            no_traces,
        } => {
            let models = load_model(&model)?;
            let (report, traces) = run_classify(&trials(&data)?, &models, &cfg, phase.into())?;
            write_eval(&report, (!no_traces).then_some(traces.as_slice()), &out_dir)?;
        }
        Command::Simulate {
            out,
            model,
            blocks,
            seed,
            traces,
        } => {
            if let Some(b) = blocks {
                cfg.counts.blocks = b;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let models = model.as_deref().map(load_model).transpose()?;
            let sim = run_simulation(&cfg, models.as_ref())?;
            write_file(&out, serde_json::to_string_pretty(&sim)? + "\n")?;
            write_file(&out.with_extension("csv"), write_sim_trials_csv(&sim)?)?;
            if let Some(dir) = traces {
                write_robot_traces(&cfg, &sim, &dir)?;
            }
        }
        Command::Report { dir, out_dir } => {
            let paths = PipelinePaths::new(&dir);
            if cli.config.is_none() && paths.config().exists() {
                cfg = RunConfig::load(&paths.config())?;
            }
            let train = trials(&paths.train())?;
            let eval = trials(&paths.eval())?;
            let models = load_model(paths.model())?;
            let carry: EvalReport = json(&paths.classify(MotionPhase::Carry).join("report.json"))?;
            let reach_path = paths.classify(MotionPhase::Reach).join("report.json");
            let reach: Option<EvalReport> = if reach_path.exists() { Some(json(&reach_path)?) } else { None };
            let sim: SimReport = json(&paths.simulate())?;
            let inputs = ReportInputs {
                train: &train,
                eval: &eval,
                fit: &cfg.fit,
                models: &models,
                carry: &carry,
                reach: reach.as_ref(),
                sim: &sim,
            };
            write_report(&inputs, &out_dir.unwrap_or_else(|| paths.report()))?;
        }
        Command::Pipeline { out_dir, seed } => {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let root = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let paths = run_pipeline(&cfg, &root)?;
            print!("{}", read_file(&paths.report().join("summary.txt"))?);
        }
    }
    Ok(())
}

/// Parse `args`, run, report errors on stderr and return the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let code = e.exit_code();
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let s_msg = s.to_string();
                if !msg.contains(&s_msg) {
                    msg.push_str(": ");
                    msg.push_str(&s_msg);
                }
                src = s.source();
            }
            eprintln!("error[{code}]: {msg}");
            code
        }
    }
}
