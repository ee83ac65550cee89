//! Objectives, evaluators and weights managers.

pub mod objective;
pub mod supernet;
pub mod tabular;
pub mod task;

use std::sync::Arc;

pub use objective::Objective;
pub use supernet::{CandidateNet, NullWeightsManager, SupernetEvaluator, SupernetManager, SupernetWeights};
pub use tabular::{SyntheticOracle, TabularEvaluator, TabularSource};
pub use task::RegressionTask;

use crate::error::Result;
use crate::nn::TensorArchive;
use crate::rng::StreamRng;
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

/// Fills rollouts with candidate networks.
pub trait WeightsManager: Send + Sync {
    fn type_name(&self) -> &'static str;

    fn space(&self) -> &Arc<SearchSpace>;

    /// Attaches a candidate to `rollout` (or nothing, for managers without
    /// weights).
    fn assemble(&self, rollout: &mut DiscreteRollout) -> Result<()>;

    /// Shared supernet storage, when this manager has one.
    fn supernet(&self) -> Option<Arc<std::sync::RwLock<SupernetWeights>>> {
        None
    }
}

/// Assigns metrics and a reward to rollouts.
///
/// `evaluate` takes `&self` and may run on several threads at once; the
/// caller must not run `train` concurrently with it.
pub trait Evaluator: Send + Sync {
    fn type_name(&self) -> &'static str;

    fn space(&self) -> &Arc<SearchSpace>;

    /// Adds metrics and `"reward"` to `rollout.perf`.
    fn evaluate(&self, rollout: &mut DiscreteRollout) -> Result<()>;

    /// Rollouts requested from the controller per update call; 0 makes
    /// the update a no-op.
    fn update_samples(&self) -> usize {
        0
    }

    /// One update on already-assembled rollouts; returns the mean loss.
    fn train(&mut self, _rollouts: &[DiscreteRollout], _rng: &mut StreamRng) -> Result<Option<f64>> {
        Ok(None)
    }

    /// Whether concurrent `evaluate` calls between updates are allowed in
    /// the async trainer.
    fn supports_async(&self) -> bool {
        true
    }

    fn save(&self) -> Result<TensorArchive>;

    fn load(&mut self, archive: &TensorArchive) -> Result<()>;
}
