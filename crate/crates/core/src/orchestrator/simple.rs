use std::slice;

use super::{EpochRunner, SearchOptions, SearchReport, TraceEvent};
use crate::error::{Error, Result};
use crate::session::Session;

/// Per epoch: `controller_samples_per_epoch` rounds of sample, assemble,
/// evaluate and step on one rollout, then the evaluator updates.
pub fn simple_search(session: &mut Session, options: &SearchOptions) -> Result<SearchReport> {
    let mut run = EpochRunner::new(options)?;
    let mut id = 0;
    for epoch in run.epochs(session) {
        let first = run.report.records.len();
        for step in 0..session.trainer.controller_samples_per_epoch {
            let at = |e: Error| e.context(format!("epoch {epoch} step {step}"));
            let mut rollout = session
                .controller
                .explore(1, &mut session.rngs.controller)
                .map_err(at)?
                .pop()
                .ok_or_else(|| at(Error::Empty("controller returned no rollout".into())))?;
            run.trace(TraceEvent::Sample(id));
            session.weights_manager.assemble(&mut rollout).map_err(at)?;
            run.trace(TraceEvent::Assemble(id));
            session.evaluator.evaluate(&mut rollout).map_err(at)?;
            run.trace(TraceEvent::Evaluate(id));
            session
                .controller
                .step(slice::from_ref(&rollout), &mut session.rngs.controller)
                .map_err(at)?;
            run.trace(TraceEvent::Step(id));
            run.report.controller_steps += 1;
            session.progress.controller_steps += 1;
            session.progress.evaluations += 1;
            session.progress.observe(&rollout);
            run.record(&session.space, epoch, step, &rollout, None)?;
            run.report.max_outstanding = run.report.max_outstanding.max(1);
            id += 1;
        }
        run.finish_epoch(session, epoch, first)?;
    }
    run.finish(session)
}
