//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 config or validation error,
//! 3 runtime failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, sample_config, ComponentKind};
use crate::controller::SampleMode;
use crate::error::{Error, Result};
use crate::hwcost::{run_pipeline, CostModelKind, DeviceKind, DeviceSimulator, TrainSettings};
use crate::nn::TensorArchive;
use crate::orchestrator::{
    self, default_home, derive, derived_to_archs, eval_arch, final_train, load_checkpoint, parse_archs,
    resolve_checkpoint, FinalModel, SearchOptions, TrainerMode,
};
use crate::registry::Registry;
use crate::rng::stream_rng;
use crate::session::Session;
use crate::space::BlockwiseSpace;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nasforge", version, about = "Modular neural architecture search")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SearchArgs {
    #[arg(long, short)]
    pub config: PathBuf,
    /// Run directory for the log and checkpoints [default: $NASFORGE_HOME/run]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override trainer.epochs
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Resume from a checkpoint, checkpoint root or run directory
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop once this many epochs are done (the run can be resumed)
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Explore,
    Derive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Device {
    #[value(name = "gpu_like")]
    GpuLike,
    #[value(name = "fpga_like")]
    FpgaLike,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a search with the configured trainer
    Search(SearchArgs),
    /// Run a search with the async trainer
    Mpsearch {
        #[command(flatten)]
        args: SearchArgs,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        max_inflight: Option<usize>,
    },
    /// Print uniformly random genotypes of the configured space
    RandomSample {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(short, default_value_t = 1)]
        n: usize,
    },
    /// Print genotypes sampled from the controller
    Sample {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(short, default_value_t = 1)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Mode::Explore)]
        mode: Mode,
        /// Checkpoint to load first
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Derive architectures with the trained components into a genotype file
    Derive {
        #[arg(long, short)]
        config: PathBuf,
        /// Checkpoint, checkpoint root or run directory
        #[arg(long)]
        load: Option<PathBuf>,
        /// Number of architectures [default: trainer.derive_count]
        #[arg(short)]
        n: Option<usize>,
        /// Output file [default: stdout]
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Evaluate the architectures of a genotype file; prints JSON lines
    EvalArch {
        #[arg(long, short)]
        config: PathBuf,
        archs: PathBuf,
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Final training of a toy-MLP genotype with fresh weights
    Train {
        #[arg(long, short)]
        config: PathBuf,
        /// Genotype string
        #[arg(long, conflicts_with = "archs")]
        genotype: Option<String>,
        /// Genotype file; its first entry is trained
        #[arg(long)]
        archs: Option<PathBuf>,
        /// Override trainer.final_steps
        #[arg(long)]
        steps: Option<usize>,
        /// Where to write the model [default: $NASFORGE_HOME/final_model.bin]
        #[arg(long)]
        save: Option<PathBuf>,
    },
    /// Held-out MSE of a model written by `train`
    Test {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Print a complete search config with defaults and comments
    GenSampleConfig {
        #[arg(long)]
        search_space: Option<String>,
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        weights_manager: Option<String>,
        #[arg(long)]
        evaluator: Option<String>,
        #[arg(long)]
        trainer: Option<String>,
    },
    /// Print a config for final training of a toy-MLP genotype
    GenFinalSampleConfig,
    /// List registered components
    Registry {
        /// Also list parameters
        #[arg(long, short)]
        verbose: bool,
    },
    /// Profile a synthetic device, fit the cost models and report rMSE
    Hwcost {
        #[arg(long, value_enum, default_value_t = Device::GpuLike)]
        device: Device,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        /// Output directory [default: $NASFORGE_HOME/hwcost]
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn session(config: &Path) -> Result<Session> {
    let registry = Registry::with_builtins();
    let cfg = load_config(config, &registry).map_err(|e| match e {
        Error::Io { source, .. } => Error::Validation {
            path: config.display().to_string(),
            msg: format!("cannot read config: {source}"),
        },
        e => e.context(config.display().to_string()),
    })?;
    Session::assemble(&cfg, &registry)
}

fn maybe_load(session: &mut Session, load: Option<&Path>) -> Result<()> {
    if let Some(p) = load {
        load_checkpoint(session, &resolve_checkpoint(p)?)?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run_search(args: SearchArgs, mode: Option<TrainerMode>, out: &mut dyn Write) -> Result<()> {
    let mut s = session(&args.config)?;
    if let Some(m) = mode {
        s.trainer.mode = m;
    }
    if let Some(e) = args.epochs {
        if e == 0 {
            return Err(Error::InvalidArgument("--epochs must be at least 1".into()));
        }
        s.trainer.epochs = e;
    }
    let dir = args.out.unwrap_or_else(|| default_home().join("run"));
    if let Some(r) = &args.resume {
        let meta = load_checkpoint(&mut s, &resolve_checkpoint(r)?)?;
        writeln!(out, "resumed after epoch {}", meta.epoch).map_err(out_err)?;
    }
    let options = SearchOptions {
        log_path: Some(dir.join("search.log.jsonl")),
        checkpoint_root: Some(dir.join("ckpt")),
        stop_after: args.stop_after,
        trace: false,
    };
    let report = orchestrator::search(&mut s, &options)?;
    for e in &report.epochs {
        writeln!(
            out,
            "epoch {:>3}  mean_reward {:>9}  best {:>9}",
            e.epoch,
            e.mean_reward.map_or("-".into(), |v| format!("{v:.5}")),
            e.best_so_far.map_or("-".into(), |v| format!("{v:.5}")),
        )
        .map_err(out_err)?;
    }
    if let Some(g) = &s.progress.best_genotype {
        writeln!(out, "best {} reward {:.6}", s.space.genotype_to_string(g)?, s.progress.best_reward.unwrap_or(f64::NAN))
            .map_err(out_err)?;
    }
    if !report.failures.is_empty() {
        writeln!(out, "{} evaluations failed", report.failures.len()).map_err(out_err)?;
    }
    writeln!(out, "run directory {}", dir.display()).map_err(out_err)?;
    Ok(())
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Search(args) => run_search(args, None, out),
        Command::Mpsearch {
            args,
            workers,
            max_inflight,
        } => {
            let base = match session(&args.config)?.trainer.mode {
                TrainerMode::Async {
                    num_workers,
                    max_inflight,
                } => (num_workers, max_inflight),
                TrainerMode::Simple => (4, 8),
            };
            let mode = TrainerMode::Async {
                num_workers: workers.unwrap_or(base.0),
                max_inflight: max_inflight.unwrap_or(base.1),
            };
            run_search(args, Some(mode), out)
        }
        Command::RandomSample { config, n } => {
            let s = session(&config)?;
            let mut rng = stream_rng(s.seed, "cli/random-sample");
            for _ in 0..n {
                writeln!(out, "{}", s.space.genotype_to_string(&s.space.random_genotype(&mut rng))?).map_err(out_err)?;
            }
            Ok(())
        }
        Command::Sample { config, n, mode, load } => {
            let mut s = session(&config)?;
            maybe_load(&mut s, load.as_deref())?;
            let mode = match mode {
                Mode::Explore => SampleMode::Explore,
                Mode::Derive => SampleMode::Derive,
            };
            for r in s.sample(n, mode)? {
                writeln!(out, "{}", s.space.genotype_to_string(&r.genotype)?).map_err(out_err)?;
            }
            Ok(())
        }
        Command::Derive {
            config,
            load,
            n,
            out: file,
        } => {
            let mut s = session(&config)?;
            maybe_load(&mut s, load.as_deref())?;
            let n = n.unwrap_or(s.trainer.derive_count);
            let text = derived_to_archs(&derive(&mut s, n)?);
            match file {
                Some(p) => write_file(&p, text.as_bytes()),
                None => out.write_all(text.as_bytes()).map_err(out_err),
            }
        }
        Command::EvalArch { config, archs, load } => {
            let mut s = session(&config)?;
            maybe_load(&mut s, load.as_deref())?;
            let text = std::fs::read_to_string(&archs).map_err(|e| Error::io(&archs, e))?;
            let report = eval_arch(&s, &text).map_err(|e| e.context(archs.display().to_string()))?;
            for r in &report.records {
                writeln!(out, "{}", serde_json::json!({"line": r.line, "genotype": r.genotype, "perf": r.perf}))
                    .map_err(out_err)?;
            }
            for e in &report.errors {
                writeln!(out, "{}", serde_json::json!({"line": e.line, "error": e.message})).map_err(out_err)?;
                eprintln!("{}: line {}: {}", archs.display(), e.line, e.message);
            }
            Ok(())
        }
        Command::Train {
            config,
            genotype,
            archs,
            steps,
            save,
        } => {
            let s = session(&config)?;
            let g = match (genotype, archs) {
                (Some(g), _) => s.space.parse_genotype(&g)?,
                (None, Some(p)) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    let (entries, errors) = parse_archs(&s.space, &text)?;
                    match (entries.into_iter().next(), errors.first()) {
                        (Some(e), _) => e.genotype,
                        (None, Some(err)) => {
                            return Err(Error::Parse {
                                line: err.line,
                                msg: err.message.clone(),
                            }
                            .context(p.display().to_string()))
                        }
                        (None, None) => return Err(Error::Empty(format!("{} lists no architectures", p.display()))),
                    }
                }
                (None, None) => return Err(Error::InvalidArgument("train needs --genotype or --archs".into())),
            };
            let steps = steps.unwrap_or(s.trainer.final_steps);
            let (model, report) = final_train(&s.space, &g, &s.dataset, steps, s.trainer.final_learning_rate, s.seed)?;
            let path = save.unwrap_or_else(|| default_home().join("final_model.bin"));
            write_file(&path, &model.save()?.to_bytes())?;
            writeln!(
                out,
                "{}",
                serde_json::json!({
                    "genotype": report.genotype,
                    "steps": report.steps,
                    "initial_test_mse": report.initial_test_mse,
                    "test_mse": report.test_mse,
                    "model": path,
                })
            )
            .map_err(out_err)
        }
        Command::Test { config, model } => {
            let s = session(&config)?;
            let m = FinalModel::load(&TensorArchive::load(&model)?)?;
            let mse = m.test_mse(&s.dataset)?;
            writeln!(out, "{}", serde_json::json!({"genotype": m.genotype, "test_mse": mse})).map_err(out_err)
        }
        Command::GenSampleConfig {
            search_space,
            controller,
            weights_manager,
            evaluator,
            trainer,
        } => {
            let mut choices = Vec::new();
            for (kind, v) in [
                (ComponentKind::SearchSpace, &search_space),
                (ComponentKind::Controller, &controller),
                (ComponentKind::WeightsManager, &weights_manager),
                (ComponentKind::Evaluator, &evaluator),
                (ComponentKind::Trainer, &trainer),
            ] {
                if let Some(name) = v {
                    choices.push((kind, name.as_str()));
                }
            }
            let registry = Registry::with_builtins();
            let text = sample_config(&registry, &choices, "nasforge search configuration")?;
            out.write_all(text.as_bytes()).map_err(out_err)
        }
        Command::GenFinalSampleConfig => {
            let registry = Registry::with_builtins();
            let choices = [
                (ComponentKind::SearchSpace, "toy_mlp"),
                (ComponentKind::WeightsManager, "supernet"),
                (ComponentKind::Evaluator, "supernet"),
            ];
            let header = "nasforge final-training configuration\n\
                          `train` uses dataset, search_space and trainer.final_*";
            let text = sample_config(&registry, &choices, header)?;
            out.write_all(text.as_bytes()).map_err(out_err)
        }
        Command::Registry { verbose } => {
            let registry = Registry::with_builtins();
            for reg in registry.iter() {
                writeln!(out, "{:<16} {:<22} {}", reg.kind.name(), reg.name, reg.doc).map_err(out_err)?;
                if verbose {
                    for p in &reg.schema {
                        writeln!(out, "    {:<30} {:<24} {}", p.name, p.ty.describe(), p.doc).map_err(out_err)?;
                    }
                }
            }
            Ok(())
        }
        Command::Hwcost {
            device,
            seed,
            train,
            test,
            epochs,
            out: dir,
        } => {
            let kind = match device {
                Device::GpuLike => DeviceKind::GpuLike,
                Device::FpgaLike => DeviceKind::FpgaLike,
            };
            let sim = DeviceSimulator::new(kind, seed);
            let settings = TrainSettings {
                epochs,
                seed,
                ..TrainSettings::default()
            };
            let space = BlockwiseSpace::default();
            let result = run_pipeline(&space, &sim, &CostModelKind::ALL, train, test, &settings, seed)?;
            let dir = dir.unwrap_or_else(|| default_home().join("hwcost"));
            result.write_to(&dir)?;
            out.write_all(result.report.to_text().as_bytes()).map_err(out_err)?;
            writeln!(out, "written to {}", dir.display()).map_err(out_err)
        }
    }
}
