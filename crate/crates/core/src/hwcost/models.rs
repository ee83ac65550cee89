//! Network-cost predictors built from per-block features.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::CostSample;
use super::normalize::Normalizer;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::nn::{Activation, DenseGrads, DenseLayer, LstmCell, LstmGrads, LstmStep, Mlp, Optimizer, ParamSet, Tensor2};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::space::BlockFeature;

pub const LSTM_FEATURES: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostModelKind {
    Sum,
    Linear1,
    Linear2,
    Mlp,
    Lstm,
}

impl CostModelKind {
    pub const ALL: [CostModelKind; 5] = [
        CostModelKind::Sum,
        CostModelKind::Linear1,
        CostModelKind::Linear2,
        CostModelKind::Mlp,
        CostModelKind::Lstm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostModelKind::Sum => "sum",
            CostModelKind::Linear1 => "linear1",
            CostModelKind::Linear2 => "linear2",
            CostModelKind::Mlp => "mlp",
            CostModelKind::Lstm => "lstm",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Hyperparameters of the learned (mlp/lstm) models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub mlp_hidden: Vec<usize>,
    pub mlp_pad_len: usize,
    pub lstm_hidden: usize,
    pub seed: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.001,
            batch_size: 64,
            mlp_hidden: vec![64, 64],
            mlp_pad_len: 20,
            lstm_hidden: 32,
            seed: 0,
        }
    }
}

/// LSTM over per-block feature vectors; the last hidden state goes
/// through a linear head to a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmRegressor<T> {
    pub cell: LstmCell<T>,
    pub head: DenseLayer<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmRegressorGrads<T> {
    pub cell: LstmGrads<T>,
    pub head: DenseGrads<T>,
}

impl<T: Scalar> LstmRegressor<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            cell: LstmCell::new(input, hidden, rng),
            head: DenseLayer::new(hidden, 1, Activation::Identity, rng),
        }
    }

    fn run(&self, seq: &[Vec<T>]) -> Result<(Vec<LstmStep<T>>, T)> {
        if seq.is_empty() {
            return Err(Error::Empty("lstm regressor on an empty sequence".into()));
        }
        let steps = self.cell.forward_sequence(seq)?;
        let h = &steps.last().unwrap().h;
        let out = self.head.forward(&Tensor2::from_vec(1, h.len(), h.clone())?)?;
        Ok((steps, out.get(0, 0)))
    }

    pub fn predict(&self, seq: &[Vec<T>]) -> Result<T> {
        Ok(self.run(seq)?.1)
    }

    /// Adds the gradient of `scale · (pred − target)²` to `grads` and
    /// returns the squared error.
    pub fn accumulate_grads(&self, seq: &[Vec<T>], target: T, scale: T, grads: &mut LstmRegressorGrads<T>) -> Result<T> {
        let (steps, pred) = self.run(seq)?;
        let err = pred - target;
        let dpred = Tensor2::from_vec(1, 1, vec![T::lit(2.0) * err * scale])?;
        let h_last = &steps.last().unwrap().h;
        let (dh, head_g) = self
            .head
            .backward(&Tensor2::from_vec(1, h_last.len(), h_last.clone())?, &dpred)?;
        grads.head.add_scaled(&head_g, T::one())?;
        let mut dh = dh.into_data();
        let mut dc = vec![T::zero(); self.cell.hidden_size];
        for step in steps.iter().rev() {
            let (_, dh_prev, dc_prev) = self.cell.backward(step, &dh, &dc, &mut grads.cell);
            dh = dh_prev;
            dc = dc_prev;
        }
        Ok(err * err)
    }

    /// Mean squared error over a batch and its gradient, computed with one
    /// packed pass over all sequences.
    pub fn batch_loss(&self, seqs: &[&[Vec<T>]], targets: &[T]) -> Result<(T, LstmRegressorGrads<T>)> {
        if seqs.len() != targets.len() {
            return Err(Error::Shape(format!("{} sequences but {} targets", seqs.len(), targets.len())));
        }
        let mut order: Vec<usize> = (0..seqs.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(seqs[i].len()));
        let sorted: Vec<&[Vec<T>]> = order.iter().map(|&i| seqs[i]).collect();
        let trace = self.cell.forward_packed(&sorted)?;
        let batch = seqs.len();
        let hidden = Tensor2::from_vec(batch, self.cell.hidden_size, trace.last_h.clone())?;
        let pred = self.head.forward(&hidden)?;
        let scale = T::one() / T::from_usize(batch).unwrap();
        let mut loss = T::zero();
        let dpred: Vec<T> = order
            .iter()
            .enumerate()
            .map(|(row, &i)| {
                let err = pred.get(row, 0) - targets[i];
                loss += err * err;
                T::lit(2.0) * err * scale
            })
            .collect();
        let (dh, head) = self.head.backward(&hidden, &Tensor2::from_vec(batch, 1, dpred)?)?;
        let mut cell = LstmGrads::zeros_like(&self.cell);
        self.cell.backward_packed(&trace, dh.data(), &mut cell)?;
        Ok((loss * scale, LstmRegressorGrads { cell, head }))
    }
}

impl<T: Scalar> LstmRegressorGrads<T> {
    pub fn zeros_like(model: &LstmRegressor<T>) -> Self {
        Self {
            cell: LstmGrads::zeros_like(&model.cell),
            head: DenseGrads::zeros_like(&model.head),
        }
    }
}

impl<T: Scalar> ParamSet<T> for LstmRegressor<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut v = self.cell.param_slices();
        v.extend(self.head.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.cell.param_slices_mut();
        v.extend(self.head.param_slices_mut());
        v
    }
}

impl<T: Scalar> ParamSet<T> for LstmRegressorGrads<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        let mut v = self.cell.param_slices();
        v.extend(self.head.param_slices());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.cell.param_slices_mut();
        v.extend(self.head.param_slices_mut());
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpCostModel {
    pub net: Mlp<f64>,
    pub pad_len: usize,
    pub x_norm: Normalizer,
    pub y_norm: Normalizer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCostModel {
    pub net: LstmRegressor<f64>,
    pub x_norm: Normalizer,
    pub y_norm: Normalizer,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CostModel {
    Sum,
    Linear1 { a: f64, b: f64 },
    Linear2 { a: f64, b: f64, c: f64 },
    Mlp(MlpCostModel),
    Lstm(LstmCostModel),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    /// Training MSE (native units) before any parameter update.
    pub initial_train_mse: f64,
    pub final_train_mse: f64,
}

fn block_sum(features: &[BlockFeature]) -> f64 {
    features.iter().map(|f| f.cost).sum()
}

pub fn padded_costs(features: &[BlockFeature], pad_len: usize) -> Result<Vec<f64>> {
    if features.len() > pad_len {
        return Err(Error::InvalidArgument(format!(
            "{} blocks exceed the MLP padding length {pad_len}",
            features.len()
        )));
    }
    let mut v: Vec<f64> = features.iter().map(|f| f.cost).collect();
    v.resize(pad_len, 0.0);
    Ok(v)
}

impl CostModel {
    pub fn kind(&self) -> CostModelKind {
        match self {
            CostModel::Sum => CostModelKind::Sum,
            CostModel::Linear1 { .. } => CostModelKind::Linear1,
            CostModel::Linear2 { .. } => CostModelKind::Linear2,
            CostModel::Mlp(_) => CostModelKind::Mlp,
            CostModel::Lstm(_) => CostModelKind::Lstm,
        }
    }

    pub fn predict(&self, features: &[BlockFeature]) -> Result<f64> {
        if features.is_empty() {
            return Err(Error::Empty("cost prediction for an empty block list".into()));
        }
        let s = block_sum(features);
        Ok(match self {
            CostModel::Sum => s,
            CostModel::Linear1 { a, b } => a * s + b,
            CostModel::Linear2 { a, b, c } => a * s + b * features.len() as f64 + c,
            CostModel::Mlp(m) => {
                let x = m.x_norm.normalize(&padded_costs(features, m.pad_len)?);
                let y = m.net.forward(&Tensor2::from_vec(1, m.pad_len, x)?)?;
                m.y_norm.denormalize(&[y.get(0, 0)])[0]
            }
            CostModel::Lstm(m) => {
                let seq: Vec<Vec<f64>> = features.iter().map(|f| m.x_norm.normalize(&f.to_vector())).collect();
                m.y_norm.denormalize(&[m.net.predict(&seq)?])[0]
            }
        })
    }
}

fn train_mse(model: &CostModel, train: &[&CostSample]) -> Result<f64> {
    let mut acc = 0.0;
    for s in train {
        acc += (model.predict(&s.features)? - s.cost).powi(2);
    }
    Ok(acc / train.len() as f64)
}

/// Fits a model of `kind` on the training samples.
pub fn fit(kind: CostModelKind, train: &[&CostSample], settings: &TrainSettings) -> Result<(CostModel, FitReport)> {
    if train.is_empty() {
        return Err(Error::Empty("no training samples".into()));
    }
    let y: Vec<f64> = train.iter().map(|s| s.cost).collect();
    let (model, initial) = match kind {
        CostModelKind::Sum => (CostModel::Sum, None),
        CostModelKind::Linear1 => {
            let design: Vec<Vec<f64>> = train.iter().map(|s| vec![s.block_sum(), 1.0]).collect();
            let beta = least_squares(&design, &y)?;
            (CostModel::Linear1 { a: beta[0], b: beta[1] }, None)
        }
        CostModelKind::Linear2 => {
            let design: Vec<Vec<f64>> = train
                .iter()
                .map(|s| vec![s.block_sum(), s.features.len() as f64, 1.0])
                .collect();
            let beta = least_squares(&design, &y)?;
            (
                CostModel::Linear2 {
                    a: beta[0],
                    b: beta[1],
                    c: beta[2],
                },
                None,
            )
        }
        CostModelKind::Mlp => {
            let (m, init) = fit_mlp(train, &y, settings)?;
            (CostModel::Mlp(m), Some(init))
        }
        CostModelKind::Lstm => {
            let (m, init) = fit_lstm(train, &y, settings)?;
            (CostModel::Lstm(m), Some(init))
        }
    };
    let final_train_mse = train_mse(&model, train)?;
    Ok((
        model,
        FitReport {
            initial_train_mse: initial.unwrap_or(final_train_mse),
            final_train_mse,
        },
    ))
}

fn target_normalizer(y: &[f64]) -> Normalizer {
    Normalizer::fit(y.iter().map(std::slice::from_ref), 1)
}

fn fit_mlp(train: &[&CostSample], y: &[f64], settings: &TrainSettings) -> Result<(MlpCostModel, f64)> {
    let pad = settings.mlp_pad_len;
    let raw: Vec<Vec<f64>> = train.iter().map(|s| padded_costs(&s.features, pad)).collect::<Result<_>>()?;
    let x_norm = Normalizer::fit(raw.iter().map(Vec::as_slice), pad);
    let y_norm = target_normalizer(y);
    let xs: Vec<Vec<f64>> = raw.iter().map(|r| x_norm.normalize(r)).collect();
    let ys: Vec<f64> = y.iter().map(|&v| y_norm.normalize(&[v])[0]).collect();

    let mut rng = stream_rng(settings.seed, "cost-model/mlp");
    let mut sizes = vec![pad];
    sizes.extend(&settings.mlp_hidden);
    sizes.push(1);
    let mut model = MlpCostModel {
        net: Mlp::new(&sizes, Activation::Relu, &mut rng),
        pad_len: pad,
        x_norm,
        y_norm,
    };
    let initial = train_mse(&CostModel::Mlp(model.clone()), train)?;
    let mut opt = Optimizer::adam(settings.learning_rate);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(settings.batch_size.max(1)) {
            let bx = Tensor2::from_rows(&batch.iter().map(|&i| xs[i].clone()).collect::<Vec<_>>())?;
            let by = Tensor2::from_vec(batch.len(), 1, batch.iter().map(|&i| ys[i]).collect())?;
            let (_, grads) = model.net.mse_grads(&bx, &by)?;
            opt.step(&mut model.net, &grads)?;
        }
    }
    Ok((model, initial))
}

pub fn lstm_sequence(features: &[BlockFeature], norm: &Normalizer) -> Vec<Vec<f64>> {
    features.iter().map(|f| norm.normalize(&f.to_vector())).collect()
}

fn fit_lstm(train: &[&CostSample], y: &[f64], settings: &TrainSettings) -> Result<(LstmCostModel, f64)> {
    let vectors: Vec<[f64; LSTM_FEATURES]> = train
        .iter()
        .flat_map(|s| s.features.iter().map(BlockFeature::to_vector))
        .collect();
    let x_norm = Normalizer::fit(vectors.iter().map(|v| v.as_slice()), LSTM_FEATURES);
    let y_norm = target_normalizer(y);
    let seqs: Vec<Vec<Vec<f64>>> = train.iter().map(|s| lstm_sequence(&s.features, &x_norm)).collect();
    let ys: Vec<f64> = y.iter().map(|&v| y_norm.normalize(&[v])[0]).collect();

    let mut rng = stream_rng(settings.seed, "cost-model/lstm");
    let mut model = LstmCostModel {
        net: LstmRegressor::new(LSTM_FEATURES, settings.lstm_hidden, &mut rng),
        x_norm,
        y_norm,
    };
    let initial = train_mse(&CostModel::Lstm(model.clone()), train)?;
    let mut opt = Optimizer::adam(settings.learning_rate);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    for _ in 0..settings.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(settings.batch_size.max(1)) {
            let bx: Vec<&[Vec<f64>]> = batch.iter().map(|&i| seqs[i].as_slice()).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (_, grads) = model.net.batch_loss(&bx, &by)?;
            opt.step(&mut model.net, &grads)?;
        }
    }
    Ok((model, initial))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numerical_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn regressor_batch_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = LstmRegressor::<f64>::new(2, 3, &mut rng);
        let seqs: Vec<Vec<Vec<f64>>> = [2usize, 3, 1]
            .iter()
            .map(|&len| (0..len).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect())
            .collect();
        let refs: Vec<&[Vec<f64>]> = seqs.iter().map(Vec::as_slice).collect();
        let targets = [0.3, -0.5, 1.1];
        let (_, grads) = model.batch_loss(&refs, &targets).unwrap();
        let numeric = numerical_gradient(&model.flatten(), 1e-6, |theta| {
            let mut m = model.clone();
            m.load_flat(theta).unwrap();
            m.batch_loss(&refs, &targets).unwrap().0
        });
        let err = max_relative_error(&grads.flatten(), &numeric, 1e-3);
        assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn linear_fits_recover_exact_coefficients() {
        let samples: Vec<CostSample> = (1..6)
            .map(|n| {
                let features: Vec<BlockFeature> = (0..n)
                    .map(|i| BlockFeature {
                        cost: 1.0 + i as f64,
                        ..BlockFeature::default()
                    })
                    .collect();
                let s: f64 = features.iter().map(|f| f.cost).sum();
                CostSample {
                    genotype: vec![n],
                    cost: 2.0 * s + 0.5 * n as f64 + 3.0,
                    features,
                }
            })
            .collect();
        let refs: Vec<&CostSample> = samples.iter().collect();
        let (model, _) = fit(CostModelKind::Linear2, &refs, &TrainSettings::default()).unwrap();
        let CostModel::Linear2 { a, b, c } = model else { panic!() };
        assert!((a - 2.0).abs() < 1e-9 && (b - 0.5).abs() < 1e-9 && (c - 3.0).abs() < 1e-9);
    }
}
