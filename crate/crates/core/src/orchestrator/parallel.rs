//! Asynchronous trainer: the dispatcher owns the controller, worker
//! threads evaluate rollouts and results are stepped in completion order.

use std::collections::HashMap;
use std::slice;
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;

use super::{EpochRunner, SearchOptions, SearchReport, TraceEvent};
use crate::error::{Error, Result};
use crate::rollout::DiscreteRollout;
use crate::controller::Controller;
use crate::evaluator::{Evaluator, WeightsManager};
use crate::session::{Progress, Session, SessionRngs};
use crate::space::SearchSpace;

struct Job {
    id: usize,
    rollout: DiscreteRollout,
}

struct Done {
    id: usize,
    rollout: DiscreteRollout,
    outcome: std::result::Result<(), String>,
}

struct Pending {
    /// Controller steps taken when the rollout was sampled.
    version: u64,
    attempts: usize,
}

/// At most `min(max_inflight, num_workers)` rollouts are outstanding at
/// once. A failed evaluation is retried once, then recorded and skipped.
pub fn async_search(
    session: &mut Session,
    num_workers: usize,
    max_inflight: usize,
    options: &SearchOptions,
) -> Result<SearchReport> {
    if num_workers == 0 || max_inflight == 0 {
        return Err(Error::InvalidArgument("num_workers and max_inflight must be positive".into()));
    }
    if !session.evaluator.supports_async() {
        return Err(Error::InvalidArgument(format!(
            "evaluator {} cannot evaluate concurrently with updates; use the simple trainer",
            session.evaluator.type_name()
        )));
    }
    let window = max_inflight.min(num_workers);
    let mut run = EpochRunner::new(options)?;
    let mut next_id = 0;
    for epoch in run.epochs(session) {
        let first = run.report.records.len();
        run_epoch(session, &mut run, epoch, num_workers, window, &mut next_id)?;
        run.finish_epoch(session, epoch, first)?;
    }
    run.finish(session)
}

/// Disjoint borrows of the session used by the dispatcher.
struct Dispatcher<'a> {
    controller: &'a mut dyn Controller,
    weights_manager: &'a dyn WeightsManager,
    rngs: &'a mut SessionRngs,
    progress: &'a mut Progress,
    space: &'a SearchSpace,
    budget: usize,
    window: usize,
}

fn run_epoch(
    session: &mut Session,
    run: &mut EpochRunner<'_>,
    epoch: usize,
    num_workers: usize,
    window: usize,
    next_id: &mut usize,
) -> Result<()> {
    let budget = session.trainer.controller_samples_per_epoch;
    let Session {
        controller,
        weights_manager,
        evaluator,
        rngs,
        progress,
        space,
        ..
    } = session;
    let evaluator: &dyn Evaluator = evaluator.as_ref();
    let mut d = Dispatcher {
        controller: controller.as_mut(),
        weights_manager: weights_manager.as_ref(),
        rngs,
        progress,
        space: space.as_ref(),
        budget,
        window,
    };
    let (job_tx, job_rx) = mpsc::channel::<Job>();
    let (done_tx, done_rx) = mpsc::channel::<Done>();
    let job_rx = Mutex::new(job_rx);
    thread::scope(|scope| -> Result<()> {
        for _ in 0..num_workers.min(budget.max(1)) {
            let done_tx = done_tx.clone();
            let job_rx = &job_rx;
            scope.spawn(move || loop {
                let job = match job_rx.lock() {
                    Ok(rx) => rx.recv(),
                    Err(_) => return,
                };
                let Ok(mut job) = job else { return };
                let outcome = evaluator.evaluate(&mut job.rollout).map_err(|e| e.to_string());
                let done = Done {
                    id: job.id,
                    rollout: job.rollout,
                    outcome,
                };
                if done_tx.send(done).is_err() {
                    return;
                }
            });
        }
        drop(done_tx);
        // dropping job_tx on every exit path lets the workers shut down
        let result = d.run(run, epoch, next_id, &job_tx, &done_rx);
        drop(job_tx);
        result
    })
}

impl Dispatcher<'_> {
    fn run(
        &mut self,
        run: &mut EpochRunner<'_>,
        epoch: usize,
        next_id: &mut usize,
        job_tx: &mpsc::Sender<Job>,
        done_rx: &mpsc::Receiver<Done>,
    ) -> Result<()> {
        let lost = || Error::InvalidArgument("evaluation workers stopped unexpectedly".into());
        let mut pending: HashMap<usize, Pending> = HashMap::new();
        let mut dispatched = 0;
        let mut step = 0;
        while dispatched < self.budget || !pending.is_empty() {
            while dispatched < self.budget && pending.len() < self.window {
                let at = |e: Error| e.context(format!("epoch {epoch} dispatch {dispatched}"));
                let mut rollout = self
                    .controller
                    .explore(1, &mut self.rngs.controller)
                    .map_err(at)?
                    .pop()
                    .ok_or_else(|| at(Error::Empty("controller returned no rollout".into())))?;
                let id = *next_id;
                *next_id += 1;
                run.trace(TraceEvent::Sample(id));
                self.weights_manager.assemble(&mut rollout).map_err(at)?;
                run.trace(TraceEvent::Assemble(id));
                pending.insert(
                    id,
                    Pending {
                        version: self.progress.controller_steps,
                        attempts: 1,
                    },
                );
                job_tx.send(Job { id, rollout }).map_err(|_| lost())?;
                dispatched += 1;
                run.report.max_outstanding = run.report.max_outstanding.max(pending.len());
            }
            let done = done_rx.recv().map_err(|_| lost())?;
            let entry = pending.get_mut(&done.id).ok_or_else(lost)?;
            match done.outcome {
                Err(_) if entry.attempts < 2 => {
                    entry.attempts += 1;
                    let retry = Job {
                        id: done.id,
                        rollout: done.rollout,
                    };
                    job_tx.send(retry).map_err(|_| lost())?;
                }
                Err(msg) => {
                    pending.remove(&done.id);
                    run.fail(self.space, epoch, &done.rollout, msg)?;
                }
                Ok(()) => {
                    let p = pending.remove(&done.id).ok_or_else(lost)?;
                    run.trace(TraceEvent::Evaluate(done.id));
                    self.controller
                        .step(slice::from_ref(&done.rollout), &mut self.rngs.controller)
                        .map_err(|e| e.context(format!("epoch {epoch} step {step}")))?;
                    run.trace(TraceEvent::Step(done.id));
                    let staleness = self.progress.controller_steps - p.version;
                    self.progress.controller_steps += 1;
                    self.progress.evaluations += 1;
                    self.progress.observe(&done.rollout);
                    run.report.controller_steps += 1;
                    run.record(self.space, epoch, step, &done.rollout, Some(staleness))?;
                    step += 1;
                }
            }
        }
        Ok(())
    }
}
