//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 verification failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, export_belief_matrix, write_sweep_csv};
use crate::experiment::{missing_sweep, SweepSpec, TRAINING_SEED_OFFSET};
use crate::inference::{InferenceConfig, NewObjectHypothesis};
use crate::learning::{learn, LearnedModel};
use crate::observation::Label;
use crate::oracle::{centralized_run, compare_factorization, EXACT_MAX_EVENTS};
use crate::runtime::run_simulation;
use crate::scenario::{emit_training_split, generate_trace, inject_missing, Deletion, OFFICE_TRAINING_OBJECTS};
use crate::trace::Trace;

/// Largest belief difference `verify` accepts between the distributed and
/// centralized runs.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "camnet", version, about = "Consistent labeling across non-overlapping camera networks")]
pub struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled observation trace from the config's scenario.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the population size.
        #[arg(long)]
        objects: Option<usize>,
        /// Deletes this many observations at random.
        #[arg(long)]
        missing: Option<usize>,
        /// Also write `<out>.train.jsonl` (labeled, earliest fraction),
        /// `<out>.eval.jsonl` (unlabeled) and `<out>.truth.json`.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Learn appearance transfers and travel-time models from a labeled trace.
    Learn {
        #[arg(long)]
        trace: PathBuf,
        /// Config providing the topology priors and model defaults.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label a trace with the distributed algorithm.
    Run {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Ground-truth labels for an unlabeled trace (JSON array).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the distributed run against the centralized reference.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
        /// Also compare against exact joint enumeration (small traces only).
        #[arg(long)]
        exact: bool,
    },
    /// Mean F-measure versus number of missing detections, as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Learned model; without one, a model is learned from a separate
        /// labeled scenario of `--training-objects` objects.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = OFFICE_TRAINING_OBJECTS)]
        training_objects: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40")]
        counts: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1")]
        orders: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// First scenario seed; defaults to the config's.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the calibrated office scenario config.
    InitConfig {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NewObjectArg {
    Own,
    PerLabel,
}

/// Inference flags shared by `run` and `verify`.
#[derive(Debug, Args)]
pub struct RunFlags {
    /// Neighbourhood order q.
    #[arg(long, default_value_t = 0)]
    pub order: usize,
    /// Memory depth M, or `inf`.
    #[arg(long, default_value = "20", value_parser = parse_bound)]
    pub memory: Bound,
    /// Sampling-space cap H, or `inf`.
    #[arg(long, default_value = "15", value_parser = parse_bound)]
    pub cap: Bound,
    /// New-object likelihood; defaults to the model's.
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// False-alarm threshold on the unnormalized evidence.
    #[arg(long)]
    pub gate: Option<f64>,
    /// Renormalize truncated travel-time densities.
    #[arg(long)]
    pub renormalize: bool,
    #[arg(long, value_enum, default_value = "own")]
    pub new_object: NewObjectArg,
}

/// `Some(n)` or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bound(pub Option<usize>);

fn parse_bound(s: &str) -> std::result::Result<Bound, String> {
    if s.eq_ignore_ascii_case("inf") {
        return Ok(Bound(None));
    }
    s.parse().map(|n| Bound(Some(n))).map_err(|_| format!("expected a count or `inf`, got `{s}`"))
}

impl RunFlags {
    pub fn config(&self, model: &LearnedModel) -> Result<InferenceConfig> {
        let cfg = InferenceConfig {
            memory_depth: self.memory.0,
            space_cap: self.cap.0,
            order: self.order,
            lambda0: self.lambda0.unwrap_or(model.appearance.lambda0()),
            renormalize_truncation: self.renormalize,
            false_alarm_threshold: self.gate,
            new_object: match self.new_object {
                NewObjectArg::Own => NewObjectHypothesis::OwnLabelOnly,
                NewObjectArg::PerLabel => NewObjectHypothesis::PerLabel,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Command outcome before it is mapped to an exit code.
enum Outcome {
    Done,
    VerificationFailed,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::from_default_env().filter_level(level).try_init();
    match execute(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Generate { config, out, seed, objects, missing, split } => {
            generate(&config, &out, seed, objects, missing, split)?
        }
        Command::Learn { trace, config, out } => {
            let cfg = Config::load(&config)?;
            let model =
                learn(&cfg.topology, &at(&trace, Trace::load(&trace))?, cfg.model.bandwidth, cfg.model.lambda0)?;
            for (a, b) in &model.insufficient_data {
                println!("edge {a}->{b}: insufficient data, kept prior travel model");
            }
            model.save(&out)?;
            println!("wrote {}", out.display());
        }
        Command::Run { trace, model, flags, truth, out } => run(&trace, &model, &flags, truth.as_deref(), &out)?,
        Command::Verify { trace, model, flags, exact } => return verify(&trace, &model, &flags, exact),
        Command::Sweep { config, model, training_objects, counts, orders, trials, seed, out } => {
            let cfg = Config::load(&config)?;
            let scenario = cfg.scenario()?;
            let model = match model {
                Some(path) => at(&path, LearnedModel::load(&path))?,
                None => train_from_config(&cfg, training_objects)?,
            };
            let spec = SweepSpec {
                counts,
                orders,
                trials,
                seed: seed.unwrap_or(scenario.seed),
                config: InferenceConfig { lambda0: model.appearance.lambda0(), ..cfg.inference.clone() },
            };
            let rows = missing_sweep(&cfg.topology, &model, &spec, |s| scenario.spec(&cfg.topology, s))?;
            write_sweep_csv(&rows, BufWriter::new(File::create(&out)?))?;
            println!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::InitConfig { out } => {
            Config::office().save(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(Outcome::Done)
}

fn generate(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    objects: Option<usize>,
    missing: Option<usize>,
    split: Option<f64>,
) -> Result<()> {
    let cfg = Config::load(config)?;
    let mut scenario = cfg.scenario()?.clone();
    if let Some(n) = objects {
        scenario
            .population
            .as_mut()
            .ok_or_else(|| Error::Config("--objects needs a scenario population".into()))?
            .count = n;
    }
    let seed = seed.unwrap_or(scenario.seed);
    let mut generated = generate_trace(&cfg.topology, &scenario.spec(&cfg.topology, seed)?)?;
    if let Some(n) = missing {
        generated = inject_missing(&generated, Deletion::Count(n), seed)?;
    }
    generated.trace.save(out)?;
    println!("wrote {} observations to {}", generated.trace.len(), out.display());
    if let Some(fraction) = split {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!("split fraction must be in (0, 1), got {fraction}")));
        }
        let parts = emit_training_split(&generated.trace, fraction)?;
        parts.training.save(sibling(out, "train.jsonl"))?;
        parts.evaluation.save(sibling(out, "eval.jsonl"))?;
        std::fs::write(sibling(out, "truth.json"), serde_json::to_string(&parts.evaluation_truth)?)?;
        println!("wrote {} training and {} evaluation observations", parts.training.len(), parts.evaluation.len());
    }
    Ok(())
}

/// Learns a model from the config's scenario with a larger population and a
/// seed disjoint from the evaluation seeds.
fn train_from_config(cfg: &Config, objects: usize) -> Result<LearnedModel> {
    let mut scenario = cfg.scenario()?.clone();
    if let Some(pop) = scenario.population.as_mut() {
        pop.count = objects;
    }
    let seed = scenario.seed.wrapping_add(TRAINING_SEED_OFFSET);
    let training = generate_trace(&cfg.topology, &scenario.spec(&cfg.topology, seed)?)?;
    learn(&cfg.topology, &training.trace, cfg.model.bandwidth, cfg.model.lambda0)
}

/// Prefixes I/O errors with the file they concern.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

/// `dir/stem.suffix` for `dir/stem.ext`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn run(trace: &Path, model: &Path, flags: &RunFlags, truth: Option<&Path>, out: &Path) -> Result<()> {
    let model = at(model, LearnedModel::load(model))?;
    let trace = at(trace, Trace::load(trace))?;
    let cfg = flags.config(&model)?;
    let models = model.models(cfg.order, cfg.renormalize_truncation)?;
    let result = run_simulation(&model.topology, &trace.unlabeled(), &cfg, models)?;

    let truth: Option<Vec<Option<Label>>> = match truth {
        Some(p) => Some(serde_json::from_str(&at(p, std::fs::read_to_string(p).map_err(Error::from))?)?),
        None if trace.is_labeled() => Some(trace.events.iter().map(|e| e.truth).collect()),
        None => None,
    };
    std::fs::create_dir_all(out)?;
    result.save(out.join("labels.jsonl"))?;
    result.save_timing(out.join("timing.json"))?;
    export_belief_matrix(&result, truth.as_deref(), BufWriter::new(File::create(out.join("beliefs.csv"))?))?;
    match truth {
        Some(t) => {
            let report = evaluate(&result, &t, &cfg)?;
            std::fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&report)?)?;
            println!(
                "K {} (truth {}), precision {:.4}, recall {:.4}, F {:.4}",
                report.k_estimated, report.k_truth, report.precision, report.recall, report.f_measure
            );
        }
        None => println!("labeled {} observations (no ground truth, metrics skipped)", result.records.len()),
    }
    println!("wrote results to {}", out.display());
    Ok(())
}

fn verify(trace: &Path, model: &Path, flags: &RunFlags, exact: bool) -> Result<Outcome> {
    let model = at(model, LearnedModel::load(model))?;
    let trace = at(trace, Trace::load(trace))?.unlabeled();
    let cfg = flags.config(&model)?;
    let models = model.models(cfg.order, cfg.renormalize_truncation)?;
    let distributed = run_simulation(&model.topology, &trace, &cfg, models.clone())?;
    let central = centralized_run(&model.topology, &trace, &cfg, models.clone())?;
    let diff = distributed.max_belief_diff(&central)?;
    let pass = diff < VERIFY_TOLERANCE;
    if pass {
        println!("PASS, max diff < {VERIFY_TOLERANCE:e} (observed {diff:.3e})");
    } else {
        println!("FAIL, max diff {diff:.3e} >= {VERIFY_TOLERANCE:e}");
    }
    if exact {
        if trace.len() > EXACT_MAX_EVENTS {
            return Err(Error::TooLarge(format!(
                "--exact supports at most {EXACT_MAX_EVENTS} observations, trace has {}",
                trace.len()
            )));
        }
        let report = compare_factorization(&model.topology, &trace, cfg.order, cfg.lambda0, models)?;
        println!(
            "exact joint: argmax {}, max TV {:.3e}",
            if report.argmax_agree { "agrees" } else { "differs" },
            report.max_tv()
        );
    }
    Ok(if pass { Outcome::Done } else { Outcome::VerificationFailed })
}
