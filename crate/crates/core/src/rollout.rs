//! Rollouts: the values passed between controller, weights manager and
//! evaluator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evaluator::supernet::CandidateNet;
use crate::nn::softmax;

pub const REWARD: &str = "reward";

/// A sampled architecture. `perf` gains a `"reward"` entry once evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRollout {
    pub genotype: Vec<usize>,
    #[serde(skip)]
    pub candidate: Option<CandidateNet>,
    pub perf: BTreeMap<String, f64>,
}

impl DiscreteRollout {
    pub fn new(genotype: Vec<usize>) -> Self {
        Self {
            genotype,
            candidate: None,
            perf: BTreeMap::new(),
        }
    }

    pub fn reward(&self) -> Option<f64> {
        self.perf.get(REWARD).copied()
    }

    pub fn is_evaluated(&self) -> bool {
        self.perf.contains_key(REWARD)
    }
}

/// Relaxed architecture: one logit vector per decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentiableRollout {
    pub logits: Vec<Vec<f64>>,
}

impl DifferentiableRollout {
    pub fn new(logits: Vec<Vec<f64>>) -> Self {
        Self { logits }
    }

    /// Per-decision softmax of the logits.
    pub fn probs(&self) -> Vec<Vec<f64>> {
        self.logits.iter().map(|row| softmax(row)).collect()
    }

    /// Argmax of each probability row, lowest index on ties.
    pub fn discretize(&self) -> DiscreteRollout {
        let genotype = self.probs().iter().map(|p| argmax_first(p)).collect();
        DiscreteRollout::new(genotype)
    }
}

pub fn discretize(r: &DifferentiableRollout) -> DiscreteRollout {
    r.discretize()
}

/// Index of the first maximal entry.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}
