//! Architecture samplers: random, simulated annealing, aging evolution,
//! REINFORCE and predictor-based.

pub mod evo;
pub mod predictor;
pub mod random;
pub mod rl;
pub mod sa;

use std::collections::HashSet;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use evo::{EvoController, EvoSettings};
pub use predictor::{PredictorController, PredictorSettings};
pub use random::RandomController;
pub use rl::{RlController, RlSettings};
pub use sa::{SaController, SaSettings};

use crate::error::{Error, Result};
use crate::nn::TensorArchive;
use crate::rng::{stream_rng, StreamRng};
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Explore,
    Derive,
}

/// Optional per-step statistics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub loss: Option<f64>,
    pub accepted: Option<usize>,
}

pub trait Controller: Send {
    fn type_name(&self) -> &'static str;

    fn space(&self) -> &Arc<SearchSpace>;

    /// Stochastic proposals; may advance internal state and `rng`.
    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>>;

    /// Deterministic best guess; never changes state.
    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>>;

    /// Learns from evaluated rollouts.
    fn step(&mut self, rollouts: &[DiscreteRollout], rng: &mut StreamRng) -> Result<StepInfo>;

    fn save(&self) -> Result<TensorArchive>;

    /// Restores state from `archive`. On error the controller is unchanged.
    fn load(&mut self, archive: &TensorArchive) -> Result<()>;
}

pub fn sample(controller: &mut dyn Controller, n: usize, mode: SampleMode, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
    match mode {
        SampleMode::Explore => controller.explore(n, rng),
        SampleMode::Derive => controller.derive(n),
    }
}

pub(crate) fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    Ok(())
}

pub(crate) fn rewards(rollouts: &[DiscreteRollout]) -> Result<Vec<f64>> {
    rollouts
        .iter()
        .map(|r| {
            r.reward()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument("controller step on a rollout without a finite reward".into()))
        })
        .collect()
}

/// Stream used by derive-mode sampling that needs randomness; rebuilt on
/// every call so derive never consumes state.
pub(crate) fn derive_rng(seed: u64) -> StreamRng {
    stream_rng(seed, "controller/derive")
}

pub(crate) fn archive_with_state<S: Serialize>(kind: &str, state: &S) -> Result<TensorArchive> {
    Ok(TensorArchive::new(kind, serde_json::to_value(state)?))
}

pub(crate) fn state_from_archive<S: DeserializeOwned>(archive: &TensorArchive, kind: &str) -> Result<S> {
    archive.expect_kind(kind)?;
    serde_json::from_value(archive.meta.clone()).map_err(|e| Error::Checkpoint(format!("{kind} state: {e}")))
}

/// Best distinct (canonical) genotypes seen so far, highest reward first;
/// ties keep arrival order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BestTracker {
    pub capacity: usize,
    pub entries: Vec<(Vec<usize>, f64)>,
}

impl BestTracker {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn observe(&mut self, space: &SearchSpace, genotype: &[usize], reward: f64) {
        let g = space.canonicalize(genotype);
        if let Some(pos) = self.entries.iter().position(|(e, _)| *e == g) {
            if self.entries[pos].1 >= reward {
                return;
            }
            self.entries.remove(pos);
        }
        let at = self.entries.partition_point(|(_, r)| *r >= reward);
        self.entries.insert(at, (g, reward));
        self.entries.truncate(self.capacity.max(1));
    }

    pub fn best(&self) -> Option<(&[usize], f64)> {
        self.entries.first().map(|(g, r)| (g.as_slice(), *r))
    }

    /// Top `n` genotypes, topped up with seeded random ones when fewer
    /// have been seen.
    pub fn derive(&self, space: &SearchSpace, n: usize, seed: u64) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        let mut out: Vec<Vec<usize>> = self.entries.iter().take(n).map(|(g, _)| g.clone()).collect();
        let mut seen: HashSet<Vec<usize>> = out.iter().cloned().collect();
        let mut rng = derive_rng(seed);
        let mut attempts = 0;
        while out.len() < n {
            let g = space.canonicalize(&space.random_genotype(&mut rng));
            attempts += 1;
            // tiny spaces may not hold n distinct programs
            if seen.insert(g.clone()) || attempts > 100 * n {
                out.push(g);
            }
        }
        Ok(out.into_iter().map(DiscreteRollout::new).collect())
    }
}
