use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{archive_with_state, check_count, rewards, state_from_archive, BestTracker, Controller, StepInfo};
use crate::error::{Error, Result};
use crate::nn::TensorArchive;
use crate::rng::StreamRng;
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

const KIND: &str = "controller/evo";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvoSettings {
    pub population_size: usize,
    pub tournament_size: usize,
}

impl Default for EvoSettings {
    fn default() -> Self {
        Self {
            population_size: 50,
            tournament_size: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub genotype: Vec<usize>,
    pub reward: f64,
    pub birth: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvoState {
    pub population: VecDeque<Member>,
    pub next_birth: u64,
    pub best: BestTracker,
}

/// Aging (regularized) evolution: tournament parent, one mutation, the
/// oldest member dies on overflow. Samples uniformly until the population
/// is full.
pub struct EvoController {
    space: Arc<SearchSpace>,
    seed: u64,
    settings: EvoSettings,
    state: EvoState,
}

impl EvoController {
    pub fn new(space: Arc<SearchSpace>, settings: EvoSettings, seed: u64) -> Result<Self> {
        if settings.population_size == 0 || settings.tournament_size == 0 {
            return Err(Error::InvalidArgument("population and tournament sizes must be positive".into()));
        }
        Ok(Self {
            space,
            seed,
            settings,
            state: EvoState {
                population: VecDeque::new(),
                next_birth: 0,
                best: BestTracker::new(100),
            },
        })
    }

    pub fn state(&self) -> &EvoState {
        &self.state
    }

    pub fn insert(&mut self, genotype: Vec<usize>, reward: f64) {
        let st = &mut self.state;
        st.best.observe(&self.space, &genotype, reward);
        st.population.push_back(Member {
            genotype,
            reward,
            birth: st.next_birth,
        });
        st.next_birth += 1;
        while st.population.len() > self.settings.population_size {
            st.population.pop_front();
        }
    }

    fn tournament(&self, rng: &mut StreamRng) -> &Member {
        let pop = &self.state.population;
        let s = self.settings.tournament_size.min(pop.len());
        index::sample(rng, pop.len(), s)
            .into_iter()
            .map(|i| &pop[i])
            .reduce(|a, b| if b.reward > a.reward { b } else { a })
            .expect("tournament over a non-empty population")
    }
}

impl Controller for EvoController {
    fn type_name(&self) -> &'static str {
        "evo"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        (0..n)
            .map(|_| {
                if self.state.population.len() < self.settings.population_size {
                    Ok(self.space.random_rollout(rng))
                } else {
                    let parent = self.tournament(rng).genotype.clone();
                    Ok(DiscreteRollout::new(self.space.mutate_genotype(&parent, rng)?))
                }
            })
            .collect()
    }

    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>> {
        self.state.best.derive(&self.space, n, self.seed)
    }

    fn step(&mut self, rollouts: &[DiscreteRollout], _rng: &mut StreamRng) -> Result<StepInfo> {
        for (r, reward) in rollouts.iter().zip(rewards(rollouts)?) {
            self.insert(r.genotype.clone(), reward);
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
