//! Predictor-based search: an MLP surrogate on one-hot encodings ranks
//! random candidates, the best-scored ones are proposed.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_count, derive_rng, rewards, BestTracker, Controller, StepInfo};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Optimizer, OptimizerKind, Tensor2, TensorArchive};
use crate::rng::{stream_rng, StreamRng};
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

const KIND: &str = "controller/predictor";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorSettings {
    pub candidates_per_round: usize,
    pub top_k: usize,
    pub hidden_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for PredictorSettings {
    fn default() -> Self {
        Self {
            candidates_per_round: 100,
            top_k: 5,
            hidden_size: 32,
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 32,
        }
    }
}

/// One-hidden-layer tanh regressor trained with Adam on MSE.
#[derive(Clone, Debug, PartialEq)]
pub struct Surrogate {
    pub mlp: Mlp<f64>,
    optimizer: Optimizer<f64>,
    batch_size: usize,
}

impl Surrogate {
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, lr: f64, batch_size: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(&[inputs, hidden, 1], Activation::Tanh, rng),
            optimizer: Optimizer::adam(lr),
            batch_size: batch_size.max(1),
        }
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        Ok(self.mlp.forward(&Tensor2::from_rows(xs)?)?.into_data())
    }

    pub fn mse(&self, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
        if xs.is_empty() {
            return Err(Error::Empty("surrogate dataset is empty".into()));
        }
        let pred = self.predict(xs)?;
        Ok(pred.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ys.len() as f64)
    }

    /// Shuffled minibatch epochs over `(xs, ys)`.
    pub fn fit<R: Rng + ?Sized>(&mut self, xs: &[Vec<f64>], ys: &[f64], epochs: usize, rng: &mut R) -> Result<()> {
        if xs.len() != ys.len() {
            return Err(Error::Shape("one target per input required".into()));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        for _ in 0..epochs {
            order.shuffle(rng);
            for chunk in order.chunks(self.batch_size) {
                let x: Vec<Vec<f64>> = chunk.iter().map(|&i| xs[i].clone()).collect();
                let y = Tensor2::from_vec(chunk.len(), 1, chunk.iter().map(|&i| ys[i]).collect())?;
                let (_, grads) = self.mlp.mse_grads(&Tensor2::from_rows(&x)?, &y)?;
                self.optimizer.step(&mut self.mlp, &grads)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct PredictorState {
    genotypes: Vec<Vec<usize>>,
    rewards: Vec<f64>,
    best: BestTracker,
    steps: u64,
}

pub struct PredictorController {
    space: Arc<SearchSpace>,
    seed: u64,
    settings: PredictorSettings,
    surrogate: Surrogate,
    state: PredictorState,
}

impl PredictorController {
    pub fn new(space: Arc<SearchSpace>, settings: PredictorSettings, seed: u64) -> Result<Self> {
        if settings.candidates_per_round == 0 || settings.top_k == 0 || settings.hidden_size == 0 {
            return Err(Error::InvalidArgument(
                "candidates_per_round, top_k and hidden_size must be positive".into(),
            ));
        }
        if settings.top_k > settings.candidates_per_round {
            return Err(Error::InvalidArgument("top_k cannot exceed candidates_per_round".into()));
        }
        let inputs = space.one_hot(&space.random_genotype(&mut stream_rng(seed, "controller/predictor-probe"))).len();
        let surrogate = Surrogate::new(
            inputs,
            settings.hidden_size,
            settings.learning_rate,
            settings.batch_size,
            &mut stream_rng(seed, "controller/predictor-init"),
        );
        Ok(Self {
            space,
            seed,
            settings,
            surrogate,
            state: PredictorState {
                best: BestTracker::new(100),
                ..Default::default()
            },
        })
    }

    pub fn dataset_len(&self) -> usize {
        self.state.genotypes.len()
    }

    pub fn surrogate(&self) -> &Surrogate {
        &self.surrogate
    }

    fn encoded(&self) -> Vec<Vec<f64>> {
        self.state.genotypes.iter().map(|g| self.space.one_hot(g)).collect()
    }

    /// Training MSE of the surrogate on its own dataset.
    pub fn surrogate_mse(&self) -> Result<f64> {
        self.surrogate.mse(&self.encoded(), &self.state.rewards)
    }

    /// Up to `m` distinct canonical genotypes not in `exclude`.
    fn candidates(&self, m: usize, exclude: &HashSet<Vec<usize>>, rng: &mut StreamRng) -> Vec<Vec<usize>> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(m);
        let mut attempts = 0;
        while out.len() < m && attempts < 20 * m {
            attempts += 1;
            let g = self.space.canonicalize(&self.space.random_genotype(rng));
            if !exclude.contains(&g) && seen.insert(g.clone()) {
                out.push(g);
            }
        }
        out
    }

    /// Candidates sorted by predicted reward, best first; stable on ties.
    fn ranked(&self, cands: Vec<Vec<usize>>) -> Result<Vec<Vec<usize>>> {
        let enc: Vec<Vec<f64>> = cands.iter().map(|g| self.space.one_hot(g)).collect();
        let scores = self.surrogate.predict(&enc)?;
        let mut idx: Vec<usize> = (0..cands.len()).collect();
        idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ok(idx.into_iter().map(|i| cands[i].clone()).collect())
    }
}

impl Controller for PredictorController {
    fn type_name(&self) -> &'static str {
        "predictor"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        if self.state.genotypes.is_empty() {
            return Ok((0..n).map(|_| self.space.random_rollout(rng)).collect());
        }
        let mut exclude: HashSet<Vec<usize>> = self.state.genotypes.iter().cloned().collect();
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let cands = self.candidates(self.settings.candidates_per_round, &exclude, rng);
            if cands.is_empty() {
                // everything has been seen; fall back to uniform proposals
                out.push(self.space.random_genotype(rng));
                continue;
            }
            let take = self.settings.top_k.min(n - out.len());
            for g in self.ranked(cands)?.into_iter().take(take) {
                exclude.insert(g.clone());
                out.push(g);
            }
        }
        Ok(out.into_iter().map(DiscreteRollout::new).collect())
    }

    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        let mut rng = derive_rng(self.seed);
        let cands = self.candidates(self.settings.candidates_per_round.max(n), &HashSet::new(), &mut rng);
        let mut out = self.ranked(cands)?;
        out.truncate(n);
        while out.len() < n {
            out.push(out[out.len() % out.len().max(1)].clone());
        }
        Ok(out.into_iter().map(DiscreteRollout::new).collect())
    }

    fn step(&mut self, rollouts: &[DiscreteRollout], rng: &mut StreamRng) -> Result<StepInfo> {
        let rs = rewards(rollouts)?;
        for (r, reward) in rollouts.iter().zip(rs) {
            let g = self.space.canonicalize(&r.genotype);
            self.state.best.observe(&self.space, &g, reward);
            self.state.genotypes.push(g);
            self.state.rewards.push(reward);
        }
        self.state.steps += 1;
        let xs = self.encoded();
        self.surrogate.fit(&xs, &self.state.rewards, self.settings.epochs, rng)?;
        Ok(StepInfo {
            loss: Some(self.surrogate.mse(&xs, &self.state.rewards)?),
            accepted: None,
        })
    }

    fn save(&self) -> Result<TensorArchive> {
        let mut a = TensorArchive::new(KIND, serde_json::to_value(&self.state)?);
        a.push_params("surrogate", &self.surrogate.mlp);
        self.surrogate.optimizer.save_into(&mut a, "adam");
        Ok(a)
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        archive.expect_kind(KIND)?;
        let state: PredictorState = serde_json::from_value(archive.meta.clone())
            .map_err(|e| Error::Checkpoint(format!("predictor state: {e}")))?;
        if state.genotypes.len() != state.rewards.len() {
            return Err(Error::Checkpoint("predictor dataset lengths differ".into()));
        }
        let mut mlp = self.surrogate.mlp.clone();
        archive.read_params("surrogate", &mut mlp)?;
        let optimizer = Optimizer::load_from(archive, "adam", OptimizerKind::Adam, self.settings.learning_rate)?;
        self.surrogate.mlp = mlp;
        self.surrogate.optimizer = optimizer;
        self.state = state;
        Ok(())
    }
}

impl std::fmt::Debug for PredictorController {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictorController")
            .field("dataset", &self.state.genotypes.len())
            .field("settings", &self.settings)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn surrogate_fits_a_linear_function() {
        let mut rng = StreamRng::seed_from_u64(3);
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..200).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.iter().zip(&w).map(|(a, b)| a * b).sum()).collect();
        let mut s = Surrogate::new(8, 32, 0.01, 32, &mut rng);
        let before = s.mse(&xs, &ys).unwrap();
        s.fit(&xs, &ys, 50, &mut rng).unwrap();
        assert!(s.mse(&xs, &ys).unwrap() < 0.5 * before);
    }
}
