//! Standalone training of a derived toy-MLP architecture.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::RegressionTask;
use crate::nn::{Activation, DenseLayer, Mlp, Optimizer, TensorArchive};
use crate::rng::stream_rng;
use crate::space::SearchSpace;

const KIND: &str = "final/toy_mlp";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    genotype: String,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<(usize, String)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalModel {
    pub genotype: String,
    pub mlp: Mlp<f64>,
}

impl FinalModel {
    fn meta(&self) -> ModelMeta {
        let l = &self.mlp.layers;
        ModelMeta {
            genotype: self.genotype.clone(),
            input_dim: l[0].inputs(),
            output_dim: l[l.len() - 1].outputs(),
            layers: l[..l.len() - 1].iter().map(|d| (d.outputs(), d.activation.name().to_string())).collect(),
        }
    }

    pub fn save(&self) -> Result<TensorArchive> {
        let mut a = TensorArchive::new(KIND, serde_json::to_value(self.meta())?);
        a.push_params("mlp", &self.mlp);
        Ok(a)
    }

    pub fn load(archive: &TensorArchive) -> Result<Self> {
        archive.expect_kind(KIND)?;
        let meta: ModelMeta =
            serde_json::from_value(archive.meta.clone()).map_err(|e| Error::Checkpoint(format!("model meta: {e}")))?;
        let layers = meta
            .layers
            .iter()
            .map(|(w, a)| {
                Activation::from_name(a)
                    .map(|a| (*w, a))
                    .ok_or_else(|| Error::Checkpoint(format!("unknown activation {a:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut mlp = build(meta.input_dim, meta.output_dim, &layers, 0);
        archive.read_params("mlp", &mut mlp)?;
        Ok(Self {
            genotype: meta.genotype,
            mlp,
        })
    }

    /// Mean squared error on the task's held-out split.
    pub fn test_mse(&self, task: &RegressionTask) -> Result<f64> {
        let pred = self.mlp.forward(&task.test_x)?;
        Ok(crate::nn::mse(pred.data(), task.test_y.data())?.0)
    }
}

fn build(input_dim: usize, output_dim: usize, layers: &[(usize, Activation)], seed: u64) -> Mlp<f64> {
    let mut rng = stream_rng(seed, "final/init");
    let mut prev = input_dim;
    let mut dense = Vec::with_capacity(layers.len() + 1);
    for &(w, act) in layers {
        dense.push(DenseLayer::new(prev, w, act, &mut rng));
        prev = w;
    }
    dense.push(DenseLayer::new(prev, output_dim, Activation::Identity, &mut rng));
    Mlp { layers: dense }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalTrainReport {
    pub genotype: String,
    pub steps: usize,
    pub initial_test_mse: f64,
    pub test_mse: f64,
    /// `(step, held-out MSE)` at regular intervals, first and last included.
    pub curve: Vec<(usize, f64)>,
}

/// Trains fresh (unshared) weights for a toy-MLP genotype with Adam on
/// minibatches of `task`.
pub fn final_train(
    space: &SearchSpace,
    genotype: &[usize],
    task: &RegressionTask,
    steps: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(FinalModel, FinalTrainReport)> {
    let toy = space
        .as_toy_mlp()
        .ok_or_else(|| Error::InvalidArgument(format!("final training needs a toy_mlp genotype, not {}", space.type_name())))?;
    space.validate(genotype)?;
    let mut model = FinalModel {
        genotype: space.genotype_to_string(genotype)?,
        mlp: build(task.input_dim, task.output_dim, &toy.layers(genotype), seed),
    };
    let mut opt = Optimizer::adam(learning_rate);
    let mut rng = stream_rng(seed, "final/batches");
    let every = (steps / 20).max(1);
    let initial = model.test_mse(task)?;
    let mut curve = vec![(0, initial)];
    for step in 1..=steps {
        let (x, y) = task.sample_batch(&mut rng);
        let (_, grads) = model.mlp.mse_grads(&x, &y)?;
        opt.step(&mut model.mlp, &grads)?;
        if step % every == 0 || step == steps {
            curve.push((step, model.test_mse(task)?));
        }
    }
    let report = FinalTrainReport {
        genotype: model.genotype.clone(),
        steps,
        initial_test_mse: initial,
        test_mse: curve.last().map_or(initial, |c| c.1),
        curve,
    };
    Ok((model, report))
}

/// Held-out MSE of a saved model.
pub fn test_model(model: &FinalModel, task: &RegressionTask) -> Result<f64> {
    model.test_mse(task)
}
