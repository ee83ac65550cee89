use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rollout::{DiscreteRollout, REWARD};

pub const DEFAULT_PENALTY: f64 = -1.0;

/// Linear reward over metrics with optional upper-bound constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub weights: IndexMap<String, f64>,
    pub constraints: IndexMap<String, f64>,
    pub penalty: f64,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            weights: IndexMap::from([("acc".to_string(), 1.0)]),
            constraints: IndexMap::new(),
            penalty: DEFAULT_PENALTY,
        }
    }
}

impl Objective {
    pub fn new(weights: IndexMap<String, f64>, constraints: IndexMap<String, f64>, penalty: f64) -> Result<Self> {
        if let Some((k, _)) = weights.iter().chain(&constraints).find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("objective coefficient {k}")));
        }
        if !penalty.is_finite() {
            return Err(Error::NonFinite("objective penalty".into()));
        }
        Ok(Self {
            weights,
            constraints,
            penalty,
        })
    }

    /// Σ coeff·metric over the metrics present, or the penalty when a
    /// present metric exceeds its bound.
    pub fn reward(&self, perf: &BTreeMap<String, f64>) -> f64 {
        let violated = self
            .constraints
            .iter()
            .any(|(name, &bound)| perf.get(name).is_some_and(|&v| v > bound));
        if violated {
            return self.penalty;
        }
        self.weights
            .iter()
            .filter_map(|(name, &c)| perf.get(name).map(|&v| c * v))
            .sum()
    }

    pub fn apply(&self, rollout: &mut DiscreteRollout) {
        let r = self.reward(&rollout.perf);
        rollout.perf.insert(REWARD.to_string(), r);
    }
}
