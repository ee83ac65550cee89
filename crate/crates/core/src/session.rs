//! Configuration-driven assembly of one search session.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{ComponentKind, Config, Params};
use crate::controller::{sample, Controller, SampleMode};
use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, Objective, RegressionTask, WeightsManager};
use crate::orchestrator::TrainerSettings;
use crate::registry::{BuildContext, Component, Registry};
use crate::rng::{stream_rng, StreamRng};
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

/// Build order; later components may depend on earlier ones.
pub const BUILD_ORDER: [ComponentKind; 7] = [
    ComponentKind::SearchSpace,
    ComponentKind::Dataset,
    ComponentKind::Objective,
    ComponentKind::WeightsManager,
    ComponentKind::Controller,
    ComponentKind::Evaluator,
    ComponentKind::Trainer,
];

/// Random streams consumed while running a session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionRngs {
    pub controller: StreamRng,
    pub evaluator: StreamRng,
}

impl SessionRngs {
    pub fn new(seed: u64) -> Self {
        Self {
            controller: stream_rng(seed, "session/controller"),
            evaluator: stream_rng(seed, "session/evaluator"),
        }
    }
}

/// Search progress carried across checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub epochs_done: usize,
    pub evaluations: usize,
    pub controller_steps: u64,
    pub best_reward: Option<f64>,
    pub best_genotype: Option<Vec<usize>>,
}

impl Progress {
    pub fn observe(&mut self, rollout: &DiscreteRollout) {
        if let Some(r) = rollout.reward() {
            if self.best_reward.is_none_or(|b| r > b) {
                self.best_reward = Some(r);
                self.best_genotype = Some(rollout.genotype.clone());
            }
        }
    }
}

pub struct Session {
    pub seed: u64,
    pub config: Config,
    pub space: Arc<SearchSpace>,
    pub dataset: Arc<RegressionTask>,
    pub objective: Arc<Objective>,
    pub weights_manager: Arc<dyn WeightsManager>,
    pub controller: Box<dyn Controller>,
    pub evaluator: Box<dyn Evaluator>,
    pub trainer: TrainerSettings,
    pub rngs: SessionRngs,
    pub progress: Progress,
}

impl Session {
    /// Builds one instance per component kind; errors carry the kind.
    pub fn assemble(config: &Config, registry: &Registry) -> Result<Self> {
        config.validate(registry)?;
        let mut ctx = BuildContext::new(config.seed());
        let mut controller = None;
        let mut evaluator = None;
        let mut trainer = None;
        for kind in BUILD_ORDER {
            let comp = config.component(kind);
            let reg = registry.lookup(kind, &comp.type_name)?;
            let params = Params::new(kind, &comp.params, &reg.schema);
            let built = (reg.build)(&params, &ctx).map_err(|e| e.in_component(kind))?;
            match built {
                Component::SearchSpace(s) => ctx.search_space = Some(s),
                Component::Dataset(d) => ctx.dataset = Some(d),
                Component::Objective(o) => ctx.objective = Some(o),
                Component::WeightsManager(w) => ctx.weights_manager = Some(w),
                Component::Controller(c) => controller = Some(c),
                Component::Evaluator(e) => evaluator = Some(e),
                Component::Trainer(t) => trainer = Some(t),
            }
        }
        let space = ctx.space()?;
        let controller = controller.ok_or_else(|| Error::InvalidArgument("no controller built".into()))?;
        let evaluator = evaluator.ok_or_else(|| Error::InvalidArgument("no evaluator built".into()))?;
        let weights_manager = ctx.manager()?;
        for (kind, other) in [
            (ComponentKind::Controller, controller.space()),
            (ComponentKind::WeightsManager, weights_manager.space()),
            (ComponentKind::Evaluator, evaluator.space()),
        ] {
            if !Arc::ptr_eq(other, &space) {
                return Err(Error::InvalidArgument("not built on the session search space".into()).in_component(kind));
            }
        }
        Ok(Self {
            seed: ctx.seed,
            config: config.clone(),
            dataset: ctx.task()?,
            objective: ctx.objective()?,
            space,
            weights_manager,
            controller,
            evaluator,
            trainer: trainer.ok_or_else(|| Error::InvalidArgument("no trainer built".into()))?,
            rngs: SessionRngs::new(ctx.seed),
            progress: Progress::default(),
        })
    }

    pub fn from_yaml(text: &str, registry: &Registry) -> Result<Self> {
        Self::assemble(&Config::parse(text)?, registry)
    }

    pub fn sample(&mut self, n: usize, mode: SampleMode) -> Result<Vec<DiscreteRollout>> {
        sample(self.controller.as_mut(), n, mode, &mut self.rngs.controller)
    }

    /// Assembles a candidate and evaluates it.
    pub fn evaluate(&self, rollout: &mut DiscreteRollout) -> Result<()> {
        self.weights_manager.assemble(rollout)?;
        self.evaluator.evaluate(rollout)
    }

    /// Samples the evaluator's requested rollouts, assembles them and runs
    /// one evaluator update. Returns the mean loss, or `None` for
    /// evaluators without updates.
    pub fn update_evaluator(&mut self) -> Result<Option<f64>> {
        let k = self.evaluator.update_samples();
        if k == 0 {
            return Ok(None);
        }
        let mut rollouts = self.controller.explore(k, &mut self.rngs.controller)?;
        for r in &mut rollouts {
            self.weights_manager.assemble(r)?;
        }
        self.evaluator.train(&rollouts, &mut self.rngs.evaluator)
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("seed", &self.seed)
            .field("space", &self.space.type_name())
            .field("controller", &self.controller.type_name())
            .field("weights_manager", &self.weights_manager.type_name())
            .field("evaluator", &self.evaluator.type_name())
            .field("progress", &self.progress)
            .finish()
    }
}
