//! Weight-sharing supernet over the toy MLP space.
//!
//! Every hidden layer stores a `max_width × max_width` block (the first
//! takes the task input); a candidate with widths `(w_1, …, w_L)` uses the
//! leading `w_l × w_{l−1}` sub-block and the leading `w_l` biases of each,
//! plus the leading `w_L` columns of the output layer.

use std::fmt;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use rand::Rng;

use super::{Evaluator, Objective, RegressionTask, WeightsManager};
use crate::error::{Error, Result};
use crate::nn::{mse, Activation, DenseGrads, DenseLayer, ParamSet, Tensor2, TensorArchive};
use crate::rng::StreamRng;
use crate::rollout::DiscreteRollout;
use crate::space::{SearchSpace, ToyMlpSpace};

#[derive(Clone, Debug, PartialEq)]
pub struct SupernetWeights {
    /// Identity-activation layers; candidates apply their own activations.
    pub hidden: Vec<DenseLayer<f64>>,
    pub output: DenseLayer<f64>,
}

impl SupernetWeights {
    pub fn new<R: Rng + ?Sized>(space: &ToyMlpSpace, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let max = space.max_width();
        let hidden = (0..space.num_layers)
            .map(|l| {
                let fan_in = if l == 0 { input_dim } else { max };
                DenseLayer::new(fan_in, max, Activation::Identity, rng)
            })
            .collect();
        Self {
            hidden,
            output: DenseLayer::new(max, output_dim, Activation::Identity, rng),
        }
    }
}

impl ParamSet<f64> for SupernetWeights {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.hidden.iter().flat_map(|l| l.param_slices()).collect();
        v.extend(self.output.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.hidden.iter_mut().flat_map(|l| l.param_slices_mut()).collect();
        v.extend(self.output.param_slices_mut());
        v
    }
}

pub type SharedWeights = Arc<RwLock<SupernetWeights>>;

fn poisoned() -> Error {
    Error::InvalidArgument("supernet weights lock poisoned by a panicked writer".into())
}

fn read(shared: &SharedWeights) -> Result<RwLockReadGuard<'_, SupernetWeights>> {
    shared.read().map_err(|_| poisoned())
}

fn write(shared: &SharedWeights) -> Result<RwLockWriteGuard<'_, SupernetWeights>> {
    shared.write().map_err(|_| poisoned())
}

/// A sub-network of the supernet: layer widths/activations plus a handle to
/// the shared storage. Holds no parameters of its own.
#[derive(Clone)]
pub struct CandidateNet {
    pub genotype: Vec<usize>,
    pub layers: Vec<(usize, Activation)>,
    shared: SharedWeights,
}

impl fmt::Debug for CandidateNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateNet")
            .field("genotype", &self.genotype)
            .field("layers", &self.layers)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CandidateNet {
    fn eq(&self, other: &Self) -> bool {
        self.genotype == other.genotype && Arc::ptr_eq(&self.shared, &other.shared)
    }
}

struct Trace {
    /// Input to every hidden layer and to the output layer.
    inputs: Vec<Tensor2<f64>>,
    pre: Vec<Tensor2<f64>>,
    out: Tensor2<f64>,
}

impl CandidateNet {
    fn trace(&self, w: &SupernetWeights, x: &Tensor2<f64>) -> Result<Trace> {
        let mut inputs = vec![x.clone()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for (layer, &(width, act)) in w.hidden.iter().zip(&self.layers) {
            let (z, _) = layer.forward_prefix(inputs.last().unwrap(), width)?;
            inputs.push(z.map(|v| act.apply(v)));
            pre.push(z);
        }
        let (out, _) = w.output.forward_prefix(inputs.last().unwrap(), w.output.outputs())?;
        Ok(Trace { inputs, pre, out })
    }

    pub fn forward(&self, x: &Tensor2<f64>) -> Result<Tensor2<f64>> {
        let w = read(&self.shared)?;
        Ok(self.trace(&w, x)?.out)
    }

    pub fn mse(&self, x: &Tensor2<f64>, y: &Tensor2<f64>) -> Result<f64> {
        let out = self.forward(x)?;
        Ok(mse(out.data(), y.data())?.0)
    }

    fn grads(&self, w: &SupernetWeights, x: &Tensor2<f64>, y: &Tensor2<f64>) -> Result<(f64, Vec<DenseGrads<f64>>, DenseGrads<f64>)> {
        let t = self.trace(w, x)?;
        if t.out.shape() != y.shape() {
            return Err(Error::Shape("candidate output and target shapes differ".into()));
        }
        let (loss, g) = mse(t.out.data(), y.data())?;
        let g = Tensor2::from_vec(y.rows(), y.cols(), g)?;
        let (mut gx, out_grads) = w.output.backward_prefix(t.inputs.last().unwrap(), &g)?;
        let mut hidden = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let act = self.layers[l].1;
            let y_l = &t.inputs[l + 1];
            let mut dz = gx;
            for ((d, &z), &a) in dz.data_mut().iter_mut().zip(t.pre[l].data()).zip(y_l.data()) {
                *d *= act.derivative(z, a);
            }
            let (g_in, grads) = w.hidden[l].backward_prefix(&t.inputs[l], &dz)?;
            hidden.push(grads);
            gx = g_in;
        }
        hidden.reverse();
        Ok((loss, hidden, out_grads))
    }

    /// One SGD step on the shared sub-blocks. Returns the loss before the step.
    pub fn sgd_step(&self, x: &Tensor2<f64>, y: &Tensor2<f64>, learning_rate: f64) -> Result<f64> {
        let mut w = write(&self.shared)?;
        let (loss, hidden, out) = self.grads(&w, x, y)?;
        for (layer, g) in w.hidden.iter_mut().zip(&hidden) {
            layer.sgd_prefix(g, learning_rate)?;
        }
        w.output.sgd_prefix(&out, learning_rate)?;
        Ok(loss)
    }

    /// Number of shared parameters this candidate reads.
    pub fn param_count(&self) -> Result<usize> {
        let w = read(&self.shared)?;
        let mut fan_in = w.hidden.first().map_or(0, |l| l.inputs());
        let mut total = 0;
        for &(width, _) in &self.layers {
            total += width * fan_in + width;
            fan_in = width;
        }
        Ok(total + w.output.outputs() * (fan_in + 1))
    }
}

fn toy_space(space: &SearchSpace) -> Result<&ToyMlpSpace> {
    space
        .as_toy_mlp()
        .ok_or_else(|| Error::InvalidArgument(format!("supernet needs a toy_mlp search space, got {}", space.type_name())))
}

pub struct SupernetManager {
    space: Arc<SearchSpace>,
    shared: SharedWeights,
}

impl SupernetManager {
    pub fn new<R: Rng + ?Sized>(space: Arc<SearchSpace>, task: &RegressionTask, rng: &mut R) -> Result<Self> {
        let weights = SupernetWeights::new(toy_space(&space)?, task.input_dim, task.output_dim, rng);
        Ok(Self {
            space,
            shared: Arc::new(RwLock::new(weights)),
        })
    }

    pub fn candidate(&self, genotype: &[usize]) -> Result<CandidateNet> {
        self.space.validate(genotype)?;
        Ok(CandidateNet {
            genotype: genotype.to_vec(),
            layers: toy_space(&self.space)?.layers(genotype),
            shared: self.shared.clone(),
        })
    }

    pub fn snapshot(&self) -> Result<SupernetWeights> {
        Ok(read(&self.shared)?.clone())
    }
}

impl WeightsManager for SupernetManager {
    fn type_name(&self) -> &'static str {
        "supernet"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn assemble(&self, rollout: &mut DiscreteRollout) -> Result<()> {
        rollout.candidate = Some(self.candidate(&rollout.genotype)?);
        Ok(())
    }

    fn supernet(&self) -> Option<SharedWeights> {
        Some(self.shared.clone())
    }
}

/// Manager for evaluators that need no weights (tabular).
pub struct NullWeightsManager {
    space: Arc<SearchSpace>,
}

impl NullWeightsManager {
    pub fn new(space: Arc<SearchSpace>) -> Self {
        Self { space }
    }
}

impl WeightsManager for NullWeightsManager {
    fn type_name(&self) -> &'static str {
        "none"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn assemble(&self, rollout: &mut DiscreteRollout) -> Result<()> {
        self.space.validate(&rollout.genotype)
    }
}

/// Scores candidates by `acc = 1 − MSE / Var(y)` on the fixed held-out
/// split and trains the shared weights with SGD.
pub struct SupernetEvaluator {
    space: Arc<SearchSpace>,
    objective: Arc<Objective>,
    task: Arc<RegressionTask>,
    shared: SharedWeights,
    pub learning_rate: f64,
    pub samples_per_update: usize,
    test_variance: f64,
}

impl SupernetEvaluator {
    pub fn new(
        manager: &dyn WeightsManager,
        objective: Arc<Objective>,
        task: Arc<RegressionTask>,
        learning_rate: f64,
        samples_per_update: usize,
    ) -> Result<Self> {
        let shared = manager
            .supernet()
            .ok_or_else(|| Error::InvalidArgument("supernet evaluator needs the supernet weights manager".into()))?;
        let variance = task.test_variance();
        if variance <= 0.0 {
            return Err(Error::InvalidArgument("held-out targets have zero variance".into()));
        }
        Ok(Self {
            space: manager.space().clone(),
            objective,
            task,
            shared,
            learning_rate,
            samples_per_update,
            test_variance: variance,
        })
    }

    fn candidate<'a>(&self, rollout: &'a DiscreteRollout) -> Result<&'a CandidateNet> {
        let c = rollout
            .candidate
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("rollout has no assembled candidate".into()))?;
        if !Arc::ptr_eq(&c.shared, &self.shared) {
            return Err(Error::InvalidArgument("candidate belongs to a different supernet".into()));
        }
        Ok(c)
    }
}

impl Evaluator for SupernetEvaluator {
    fn type_name(&self) -> &'static str {
        "supernet"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn evaluate(&self, rollout: &mut DiscreteRollout) -> Result<()> {
        let loss = self.candidate(rollout)?.mse(&self.task.test_x, &self.task.test_y)?;
        rollout.perf.insert("mse".into(), loss);
        rollout.perf.insert("acc".into(), 1.0 - loss / self.test_variance);
        self.objective.apply(rollout);
        Ok(())
    }

    fn update_samples(&self) -> usize {
        self.samples_per_update
    }

    fn train(&mut self, rollouts: &[DiscreteRollout], rng: &mut StreamRng) -> Result<Option<f64>> {
        if rollouts.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        for r in rollouts {
            let (x, y) = self.task.sample_batch(rng);
            total += self.candidate(r)?.sgd_step(&x, &y, self.learning_rate)?;
        }
        Ok(Some(total / rollouts.len() as f64))
    }

    fn supports_async(&self) -> bool {
        false
    }

    fn save(&self) -> Result<TensorArchive> {
        let mut a = TensorArchive::new("evaluator/supernet", serde_json::Value::Null);
        a.push_params("supernet", &*read(&self.shared)?);
        Ok(a)
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        archive.expect_kind("evaluator/supernet")?;
        archive.read_params("supernet", &mut *write(&self.shared)?)
    }
}
