use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{archive_with_state, check_count, rewards, state_from_archive, BestTracker, Controller, StepInfo};
use crate::error::{Error, Result};
use crate::nn::TensorArchive;
use crate::rng::StreamRng;
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

const KIND: &str = "controller/sa";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaSettings {
    pub initial_temperature: f64,
    pub cooling: f64,
}

impl SaSettings {
    /// `T0 = 0.1 · reward_scale`, cooling 0.98.
    pub fn with_reward_scale(reward_scale: f64) -> Self {
        Self {
            initial_temperature: 0.1 * reward_scale,
            cooling: 0.98,
        }
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return Err(Error::InvalidArgument("initial temperature must be positive".into()));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::InvalidArgument("cooling must lie in (0, 1)".into()));
        }
        Ok(self)
    }
}

impl Default for SaSettings {
    fn default() -> Self {
        Self::with_reward_scale(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaState {
    pub current: Option<(Vec<usize>, f64)>,
    pub temperature: f64,
    pub steps: u64,
    pub accepted: u64,
    pub best: BestTracker,
}

/// Metropolis rule: improvements always, otherwise with `exp(Δ/T)`.
pub fn accept<R: Rng + ?Sized>(delta: f64, temperature: f64, rng: &mut R) -> bool {
    delta > 0.0 || rng.random::<f64>() < (delta / temperature).exp()
}

/// Simulated annealing over single mutations of the current genotype.
pub struct SaController {
    space: Arc<SearchSpace>,
    seed: u64,
    settings: SaSettings,
    state: SaState,
}

impl SaController {
    pub fn new(space: Arc<SearchSpace>, settings: SaSettings, seed: u64) -> Result<Self> {
        let settings = settings.validated()?;
        Ok(Self {
            space,
            seed,
            state: SaState {
                current: None,
                temperature: settings.initial_temperature,
                steps: 0,
                accepted: 0,
                best: BestTracker::new(100),
            },
            settings,
        })
    }

    pub fn state(&self) -> &SaState {
        &self.state
    }

    pub fn settings(&self) -> &SaSettings {
        &self.settings
    }
}

impl Controller for SaController {
    fn type_name(&self) -> &'static str {
        "sa"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        match &self.state.current {
            None => Ok((0..n).map(|_| self.space.random_rollout(rng)).collect()),
            Some((g, _)) => (0..n)
                .map(|_| Ok(DiscreteRollout::new(self.space.mutate_genotype(g, rng)?)))
                .collect(),
        }
    }

    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>> {
        self.state.best.derive(&self.space, n, self.seed)
    }

    fn step(&mut self, rollouts: &[DiscreteRollout], rng: &mut StreamRng) -> Result<StepInfo> {
        let rs = rewards(rollouts)?;
        let mut accepted = 0;
        for (r, reward) in rollouts.iter().zip(rs) {
            let st = &mut self.state;
            st.best.observe(&self.space, &r.genotype, reward);
            let take = match &st.current {
                None => true,
                Some((_, cur)) => accept(reward - cur, st.temperature, rng),
            };
            if take {
                st.current = Some((r.genotype.clone(), reward));
                accepted += 1;
            }
            st.temperature = (st.temperature * self.settings.cooling).max(f64::MIN_POSITIVE);
            st.steps += 1;
        }
        self.state.accepted += accepted as u64;
        Ok(StepInfo {
            loss: None,
            accepted: Some(accepted),
        })
    }

    fn save(&self) -> Result<TensorArchive> {
        archive_with_state(KIND, &self.state)
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        self.state = state_from_archive(archive, KIND)?;
        Ok(())
    }
}
