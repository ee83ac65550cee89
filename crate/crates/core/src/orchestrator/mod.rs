//! Search loops, checkpoints, derivation and final training.

pub mod archs;
pub mod checkpoint;
pub mod final_train;
pub mod log;
pub mod parallel;
pub mod simple;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use archs::{
    derive, derived_to_archs, eval_arch, parse_archs, write_archs, ArchEntry, ArchError, ArchRecord, DerivedArch, EvalArchReport,
};
pub use checkpoint::{latest_checkpoint, load_checkpoint, resolve_checkpoint, save_checkpoint, CheckpointMeta};
pub use final_train::{final_train, test_model, FinalModel, FinalTrainReport};
pub use log::{LogRecord, SearchLog};
pub use parallel::async_search;
pub use simple::simple_search;

use crate::error::Result;
use crate::session::Session;

/// Environment variable naming the default output root.
pub const HOME_VAR: &str = "NASFORGE_HOME";

/// `$NASFORGE_HOME`, or the working directory when unset.
pub fn default_home() -> PathBuf {
    std::env::var_os(HOME_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrainerMode {
    Simple,
    Async { num_workers: usize, max_inflight: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainerSettings {
    pub mode: TrainerMode,
    pub epochs: usize,
    pub controller_samples_per_epoch: usize,
    pub evaluator_updates_per_epoch: usize,
    pub derive_count: usize,
    pub checkpoint_every: usize,
    pub final_steps: usize,
    pub final_learning_rate: f64,
}

impl Default for TrainerSettings {
    fn default() -> Self {
        Self {
            mode: TrainerMode::Simple,
            epochs: 10,
            controller_samples_per_epoch: 50,
            evaluator_updates_per_epoch: 0,
            derive_count: 5,
            checkpoint_every: 0,
            final_steps: 2000,
            final_learning_rate: 0.01,
        }
    }
}

/// Where a search writes and when it stops early.
#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// JSON-lines log, appended to.
    pub log_path: Option<PathBuf>,
    /// Root holding `epoch_<k>` checkpoint directories.
    pub checkpoint_root: Option<PathBuf>,
    /// Stop once this many epochs are done in total.
    pub stop_after: Option<usize>,
    /// Record [`TraceEvent`]s in the report.
    pub trace: bool,
}

/// Loop instrumentation; `id` numbers rollouts in sampling order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    Sample(usize),
    Assemble(usize),
    Evaluate(usize),
    Step(usize),
    Update,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub epoch: usize,
    pub step: usize,
    pub genotype: String,
    pub reward: f64,
    pub metrics: BTreeMap<String, f64>,
    /// Controller steps taken between sampling and stepping on this rollout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub staleness: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedEval {
    pub epoch: usize,
    pub genotype: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub mean_reward: Option<f64>,
    pub best_so_far: Option<f64>,
    pub evaluator_loss: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub records: Vec<EvalRecord>,
    pub failures: Vec<FailedEval>,
    pub epochs: Vec<EpochSummary>,
    pub controller_steps: usize,
    pub evaluator_updates: usize,
    /// Largest number of dispatched, unreturned rollouts observed.
    pub max_outstanding: usize,
    pub checkpoints: Vec<PathBuf>,
    pub trace: Vec<TraceEvent>,
}

/// Runs the trainer selected by the session config.
pub fn search(session: &mut Session, options: &SearchOptions) -> Result<SearchReport> {
    match session.trainer.mode.clone() {
        TrainerMode::Simple => simple_search(session, options),
        TrainerMode::Async {
            num_workers,
            max_inflight,
        } => async_search(session, num_workers, max_inflight, options),
    }
}

/// Shared epoch bookkeeping for both trainers.
pub(crate) struct EpochRunner<'a> {
    pub options: &'a SearchOptions,
    pub log: Option<SearchLog>,
    pub report: SearchReport,
}

impl<'a> EpochRunner<'a> {
    pub fn new(options: &'a SearchOptions) -> Result<Self> {
        let log = options.log_path.as_deref().map(SearchLog::append).transpose()?;
        Ok(Self {
            options,
            log,
            report: SearchReport::default(),
        })
    }

    pub fn trace(&mut self, ev: TraceEvent) {
        if self.options.trace {
            self.report.trace.push(ev);
        }
    }

    pub fn record(&mut self, space: &crate::space::SearchSpace, epoch: usize, step: usize, rollout: &crate::rollout::DiscreteRollout, staleness: Option<u64>) -> Result<()> {
        let mut metrics = rollout.perf.clone();
        let reward = metrics.remove(crate::rollout::REWARD).unwrap_or(f64::NAN);
        let rec = EvalRecord {
            epoch,
            step,
            genotype: space.genotype_to_string(&rollout.genotype)?,
            reward,
            metrics,
            staleness,
        };
        if let Some(log) = &mut self.log {
            log.write(&LogRecord::Eval(rec.clone()))?;
        }
        self.report.records.push(rec);
        Ok(())
    }

    pub fn fail(&mut self, space: &crate::space::SearchSpace, epoch: usize, rollout: &crate::rollout::DiscreteRollout, error: String) -> Result<()> {
        let f = FailedEval {
            epoch,
            genotype: space.genotype_to_string(&rollout.genotype)?,
            error,
        };
        if let Some(log) = &mut self.log {
            log.write(&LogRecord::Failed(f.clone()))?;
        }
        self.report.failures.push(f);
        Ok(())
    }

    /// Evaluator updates, epoch summary, progress and checkpoint.
    pub fn finish_epoch(&mut self, session: &mut Session, epoch: usize, first_record: usize) -> Result<()> {
        let mut losses = Vec::new();
        for _ in 0..session.trainer.evaluator_updates_per_epoch {
            if let Some(l) = session.update_evaluator().map_err(|e| e.context(format!("epoch {epoch} evaluator update")))? {
                losses.push(l);
            }
            self.report.evaluator_updates += 1;
            self.trace(TraceEvent::Update);
        }
        let rewards: Vec<f64> = self.report.records[first_record..].iter().map(|r| r.reward).collect();
        let summary = EpochSummary {
            epoch,
            mean_reward: (!rewards.is_empty()).then(|| rewards.iter().sum::<f64>() / rewards.len() as f64),
            best_so_far: session.progress.best_reward,
            evaluator_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
        };
        if let Some(log) = &mut self.log {
            log.write(&LogRecord::Epoch(summary.clone()))?;
        }
        self.report.epochs.push(summary);
        session.progress.epochs_done = epoch + 1;
        let every = session.trainer.checkpoint_every;
        let last = epoch + 1 == session.trainer.epochs || Some(epoch + 1) == self.options.stop_after;
        if let Some(root) = &self.options.checkpoint_root {
            if last || (every > 0 && (epoch + 1).is_multiple_of(every)) {
                self.report.checkpoints.push(save_checkpoint(session, root)?);
            }
        }
        Ok(())
    }

    pub fn finish(mut self, session: &Session) -> Result<SearchReport> {
        if let Some(log) = &mut self.log {
            let best = session
                .progress
                .best_genotype
                .as_ref()
                .map(|g| session.space.genotype_to_string(g))
                .transpose()?;
            log.write(&LogRecord::Summary {
                epochs_done: session.progress.epochs_done,
                evaluations: session.progress.evaluations,
                failed: self.report.failures.len(),
                best_reward: session.progress.best_reward,
                best_genotype: best,
            })?;
            log.flush()?;
        }
        Ok(self.report)
    }

    /// Epoch range still to run.
    pub fn epochs(&self, session: &Session) -> std::ops::Range<usize> {
        let end = self.options.stop_after.map_or(session.trainer.epochs, |s| s.min(session.trainer.epochs));
        session.progress.epochs_done..end.max(session.progress.epochs_done)
    }
}
