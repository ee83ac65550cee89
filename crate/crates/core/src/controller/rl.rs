//! REINFORCE controller: an LSTM emits one categorical distribution per
//! decision, fed the embedding of the previous choice. Explores uniformly
//! until the first step.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_count, rewards, Controller, StepInfo};
use crate::error::{Error, Result};
use crate::nn::{
    log_softmax, softmax, softmax_entropy, Activation, DenseGrads, DenseLayer, LstmCell, LstmGrads, LstmStep, Optimizer,
    OptimizerKind, ParamSet, Tensor2, TensorArchive,
};
use crate::rng::{stream_rng, StreamRng};
use crate::rollout::{argmax_first, DiscreteRollout};
use crate::space::SearchSpace;

const KIND: &str = "controller/rl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RlSettings {
    pub hidden_size: usize,
    pub embedding_size: usize,
    pub learning_rate: f64,
    pub entropy_weight: f64,
    pub baseline_decay: f64,
}

impl Default for RlSettings {
    fn default() -> Self {
        Self {
            hidden_size: 64,
            embedding_size: 16,
            learning_rate: 0.001,
            entropy_weight: 0.01,
            baseline_decay: 0.9,
        }
    }
}

/// Policy parameters. `embeddings[i]` embeds the choice made at position
/// `i` as the input of position `i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub cell: LstmCell<f64>,
    pub start: Vec<f64>,
    pub embeddings: Vec<Tensor2<f64>>,
    pub heads: Vec<DenseLayer<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrads {
    pub cell: LstmGrads<f64>,
    pub start: Vec<f64>,
    pub embeddings: Vec<Tensor2<f64>>,
    pub heads: Vec<DenseGrads<f64>>,
}

macro_rules! policy_param_set {
    ($ty:ident) => {
        impl ParamSet<f64> for $ty {
            fn param_slices(&self) -> Vec<&[f64]> {
                let mut v = self.cell.param_slices();
                v.push(&self.start);
                v.extend(self.embeddings.iter().map(|e| e.data()));
                v.extend(self.heads.iter().flat_map(|h| h.param_slices()));
                v
            }

            fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
                let mut v = self.cell.param_slices_mut();
                v.push(&mut self.start);
                v.extend(self.embeddings.iter_mut().map(|e| e.data_mut()));
                v.extend(self.heads.iter_mut().flat_map(|h| h.param_slices_mut()));
                v
            }
        }
    };
}

policy_param_set!(Policy);
policy_param_set!(PolicyGrads);

struct Pass {
    genotype: Vec<usize>,
    steps: Vec<LstmStep<f64>>,
    logits: Vec<Vec<f64>>,
}

impl Policy {
    pub fn new<R: Rng + ?Sized>(cards: &[usize], settings: &RlSettings, rng: &mut R) -> Self {
        let (h, e) = (settings.hidden_size, settings.embedding_size);
        let bound = 1.0 / (e as f64).sqrt();
        let mut table = |rows: usize| {
            let data = (0..rows * e).map(|_| rng.random_range(-bound..=bound)).collect();
            Tensor2::from_vec(rows, e, data).expect("finite init")
        };
        let start = table(1).into_data();
        let embeddings = cards[..cards.len().saturating_sub(1)].iter().map(|&c| table(c)).collect();
        Self {
            cell: LstmCell::new(e, h, rng),
            start,
            embeddings,
            heads: cards.iter().map(|&c| DenseLayer::new(h, c, Activation::Identity, rng)).collect(),
        }
    }

    fn grads_like(&self) -> PolicyGrads {
        PolicyGrads {
            cell: LstmGrads::zeros_like(&self.cell),
            start: vec![0.0; self.start.len()],
            embeddings: self.embeddings.iter().map(|t| Tensor2::zeros(t.rows(), t.cols())).collect(),
            heads: self.heads.iter().map(DenseGrads::zeros_like).collect(),
        }
    }

    /// Unrolls the policy; `choose(i, logits)` picks the decision at `i`.
    fn run(&self, mut choose: impl FnMut(usize, &[f64]) -> Result<usize>) -> Result<Pass> {
        let (mut h, mut c) = self.cell.zero_state();
        let n = self.heads.len();
        let mut pass = Pass {
            genotype: Vec::with_capacity(n),
            steps: Vec::with_capacity(n),
            logits: Vec::with_capacity(n),
        };
        for i in 0..n {
            let x = if i == 0 {
                &self.start[..]
            } else {
                self.embeddings[i - 1].row(pass.genotype[i - 1])
            };
            let step = self.cell.forward(x, &h, &c)?;
            let z = self.heads[i].forward(&Tensor2::from_vec(1, step.h.len(), step.h.clone())?)?.into_data();
            let a = choose(i, &z)?;
            if a >= z.len() {
                return Err(Error::Genotype(format!("decision {a} out of range at position {i}")));
            }
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            pass.genotype.push(a);
            pass.steps.push(step);
            pass.logits.push(z);
        }
        Ok(pass)
    }

    fn forced(&self, genotype: &[usize]) -> Result<Pass> {
        if genotype.len() != self.heads.len() {
            return Err(Error::Genotype(format!(
                "genotype has {} decisions, policy has {}",
                genotype.len(),
                self.heads.len()
            )));
        }
        self.run(|i, _| Ok(genotype[i]))
    }

    /// Adds the gradient of `−A·Σ log π(a_i) − β·Σ H_i` (times `scale`)
    /// for one forced pass; returns that loss term.
    fn accumulate(&self, pass: &Pass, advantage: f64, beta: f64, scale: f64, grads: &mut PolicyGrads) -> Result<f64> {
        let n = pass.steps.len();
        let hidden = self.cell.hidden_size;
        let mut loss = 0.0;
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        for i in (0..n).rev() {
            let z = &pass.logits[i];
            let a = pass.genotype[i];
            let p = softmax(z);
            let (ent, dent) = softmax_entropy(z);
            loss += scale * (-advantage * log_softmax(z)[a] - beta * ent);
            let dz: Vec<f64> = (0..z.len())
                .map(|k| {
                    let onehot = if k == a { 1.0 } else { 0.0 };
                    scale * (-advantage * (onehot - p[k]) - beta * dent[k])
                })
                .collect();
            let h_i = Tensor2::from_vec(1, hidden, pass.steps[i].h.clone())?;
            let (dh_head, g_head) = self.heads[i].backward(&h_i, &Tensor2::from_vec(1, z.len(), dz)?)?;
            grads.heads[i].add_scaled(&g_head, 1.0)?;
            let dh: Vec<f64> = dh_head.data().iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.cell.backward(&pass.steps[i], &dh, &dc_next, &mut grads.cell);
            let target = if i == 0 {
                &mut grads.start[..]
            } else {
                grads.embeddings[i - 1].row_mut(pass.genotype[i - 1])
            };
            target.iter_mut().zip(&dx).for_each(|(t, d)| *t += d);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        Ok(loss)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RlMeta {
    baseline: f64,
    steps: u64,
}

pub struct RlController {
    space: Arc<SearchSpace>,
    settings: RlSettings,
    policy: Policy,
    optimizer: Optimizer<f64>,
    meta: RlMeta,
}

impl RlController {
    pub fn new(space: Arc<SearchSpace>, settings: RlSettings, seed: u64) -> Result<Self> {
        if settings.hidden_size == 0 || settings.embedding_size == 0 {
            return Err(Error::InvalidArgument("rl hidden and embedding sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&settings.baseline_decay) || settings.entropy_weight < 0.0 {
            return Err(Error::InvalidArgument("baseline decay must lie in [0, 1), entropy weight >= 0".into()));
        }
        let policy = Policy::new(&space.cardinalities(), &settings, &mut stream_rng(seed, "controller/rl-init"));
        Ok(Self {
            space,
            optimizer: Optimizer::adam(settings.learning_rate),
            settings,
            policy,
            meta: RlMeta { baseline: 0.0, steps: 0 },
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn baseline(&self) -> f64 {
        self.meta.baseline
    }

    /// Per-position probabilities along a given genotype.
    pub fn probs(&self, genotype: &[usize]) -> Result<Vec<Vec<f64>>> {
        Ok(self.policy.forced(genotype)?.logits.iter().map(|z| softmax(z)).collect())
    }

    /// Mean REINFORCE loss with entropy bonus over `genotypes` and its
    /// gradient with respect to every policy parameter.
    pub fn loss_and_grads(&self, genotypes: &[Vec<usize>], advantages: &[f64]) -> Result<(f64, PolicyGrads)> {
        if genotypes.is_empty() || genotypes.len() != advantages.len() {
            return Err(Error::Shape("one advantage per genotype required".into()));
        }
        let mut grads = self.policy.grads_like();
        let scale = 1.0 / genotypes.len() as f64;
        let mut loss = 0.0;
        for (g, &adv) in genotypes.iter().zip(advantages) {
            let pass = self.policy.forced(g)?;
            loss += self.policy.accumulate(&pass, adv, self.settings.entropy_weight, scale, &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// Loss from [`RlController::loss_and_grads`] with the given parameters,
    /// for finite-difference checks.
    pub fn loss_at(&self, params: &[f64], genotypes: &[Vec<usize>], advantages: &[f64]) -> Result<f64> {
        let mut probe = Self {
            space: self.space.clone(),
            settings: self.settings.clone(),
            policy: self.policy.clone(),
            optimizer: Optimizer::adam(self.settings.learning_rate),
            meta: self.meta.clone(),
        };
        probe.policy.load_flat(params)?;
        Ok(probe.loss_and_grads(genotypes, advantages)?.0)
    }
}

impl Controller for RlController {
    fn type_name(&self) -> &'static str {
        "rl"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn explore(&mut self, n: usize, rng: &mut StreamRng) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        if self.meta.steps == 0 {
            return Ok((0..n).map(|_| self.space.random_rollout(rng)).collect());
        }
        (0..n)
            .map(|_| {
                let pass = self.policy.run(|_, z| {
                    let dist = WeightedIndex::new(softmax(z)).map_err(|e| Error::NonFinite(format!("policy probabilities: {e}")))?;
                    Ok(dist.sample(rng))
                })?;
                Ok(DiscreteRollout::new(pass.genotype))
            })
            .collect()
    }

    fn derive(&self, n: usize) -> Result<Vec<DiscreteRollout>> {
        check_count(n)?;
        let pass = self.policy.run(|_, z| Ok(argmax_first(z)))?;
        Ok(vec![DiscreteRollout::new(pass.genotype); n])
    }

    fn step(&mut self, rollouts: &[DiscreteRollout], _rng: &mut StreamRng) -> Result<StepInfo> {
        let rs = rewards(rollouts)?;
        if rs.is_empty() {
            return Ok(StepInfo::default());
        }
        let advantages: Vec<f64> = rs.iter().map(|r| r - self.meta.baseline).collect();
        let genotypes: Vec<Vec<usize>> = rollouts.iter().map(|r| r.genotype.clone()).collect();
        let (loss, grads) = self.loss_and_grads(&genotypes, &advantages)?;
        self.optimizer.step(&mut self.policy, &grads)?;
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        let d = self.settings.baseline_decay;
        self.meta.baseline = d * self.meta.baseline + (1.0 - d) * mean;
        self.meta.steps += 1;
        Ok(StepInfo {
            loss: Some(loss),
            accepted: None,
        })
    }

    fn save(&self) -> Result<TensorArchive> {
        let mut a = TensorArchive::new(KIND, serde_json::to_value(&self.meta)?);
        a.push_params("policy", &self.policy);
        self.optimizer.save_into(&mut a, "adam");
        Ok(a)
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        archive.expect_kind(KIND)?;
        let meta: RlMeta =
            serde_json::from_value(archive.meta.clone()).map_err(|e| Error::Checkpoint(format!("rl state: {e}")))?;
        let mut policy = self.policy.clone();
        archive.read_params("policy", &mut policy)?;
        let optimizer = Optimizer::load_from(archive, "adam", OptimizerKind::Adam, self.settings.learning_rate)?;
        self.policy = policy;
        self.optimizer = optimizer;
        self.meta = meta;
        Ok(())
    }
}
