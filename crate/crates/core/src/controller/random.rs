use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{archive_with_state, check_count, rewards, state_from_archive, BestTracker, Controller, StepInfo};
use crate::error::Result;
use crate::nn::TensorArchive;
use crate::rng::StreamRng;
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

const KIND: &str = "controller/random";

/// Uniform sampling; derive returns the best genotypes seen.
pub struct RandomController {
    space: Arc<SearchSpace>,
    seed: u64,
    state: RandomState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RandomState {
    best: BestTracker,
}

impl RandomController {
    pub fn new(space: Arc<SearchSpace>, seed: u64) -> Self {
        Self {
            space,
            seed,
            state: RandomState {
                best: BestTracker::new(100),
            },
        }
    }

    pub fn best(&self) -> &BestTracker {
        &self.state.best
    }
}

impl Controller for RandomController {
    fn type_name(&self) -> &'static str {
        "random"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        Ok((0..n).map(|_| self.space.random_rollout(rng)).collect())
    }

    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>> {
        self.state.best.derive(&self.space, n, self.seed)
    }

    fn step(&mut self, rollouts: &[DiscreteRollout], _rng: &mut StreamRng) -> Result<StepInfo> {
        for (r, reward) in rollouts.iter().zip(rewards(rollouts)?) {
            self.state.best.observe(&self.space, &r.genotype, reward);
        }
        Ok(StepInfo::default())
    }

    fn save(&self) -> Result<TensorArchive> {
        archive_with_state(KIND, &self.state)
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        self.state = state_from_archive(archive, KIND)?;
        Ok(())
    }
}
