#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nasforge::hwcost::LstmRegressor;
use nasforge::nn::gradcheck::{max_relative_error, numerical_gradient};
use nasforge::nn::{mse, softmax_cross_entropy, softmax_entropy, Activation, DenseLayer, LstmCell, LstmGrads, Mlp, ParamSet, Tensor2};
use nasforge::{DiscreteRollout, Registry, Session};

pub const FD_STEP: f64 = 1e-5;
pub const FD_FLOOR: f64 = 1e-6;

pub fn yaml(seed: u64, space: &str, controller: &str, weights_manager: &str, evaluator: &str, trainer: &str) -> String {
    format!(
        "seed: {seed}\n\
         dataset: {{type: synthetic_regression}}\n\
         objective: {{type: weighted}}\n\
         search_space: {space}\n\
         controller: {controller}\n\
         weights_manager: {weights_manager}\n\
         evaluator: {evaluator}\n\
         trainer: {trainer}\n"
    )
}

/// Tabular-oracle config with no weights manager.
pub fn tabular_yaml(seed: u64, space: &str, controller: &str, trainer: &str) -> String {
    yaml(seed, space, controller, "{type: none}", "{type: tabular}", trainer)
}

pub fn session(text: &str) -> Session {
    Session::from_yaml(text, &Registry::with_builtins()).expect("config assembles")
}

pub fn reward_of(session: &Session, genotype: &[usize]) -> f64 {
    let mut r = DiscreteRollout::new(genotype.to_vec());
    session.evaluate(&mut r).expect("evaluates");
    r.reward().unwrap()
}

/// Every genotype of the session space with its oracle reward.
pub fn all_rewards(session: &Session) -> Vec<(Vec<usize>, f64)> {
    session
        .space
        .enumerate()
        .expect("enumerable")
        .into_iter()
        .map(|g| {
            let r = reward_of(session, &g);
            (g, r)
        })
        .collect()
}

/// Number of genotypes strictly better than `reward`.
pub fn rank_of(table: &[(Vec<usize>, f64)], reward: f64) -> usize {
    table.iter().filter(|(_, r)| *r > reward).count()
}

pub fn multiset(pairs: impl IntoIterator<Item = (String, f64)>) -> HashMap<(String, u64), usize> {
    let mut m = HashMap::new();
    for (g, r) in pairs {
        *m.entry((g, r.to_bits())).or_insert(0) += 1;
    }
    m
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn params_error<P, G>(model: &P, analytic: &G, loss: impl Fn(&P) -> f64) -> f64
where
    P: ParamSet<f64> + Clone,
    G: ParamSet<f64>,
{
    let flat = model.flatten();
    let numeric = numerical_gradient(&flat, FD_STEP, |p| {
        let mut probe = model.clone();
        probe.load_flat(p).unwrap();
        loss(&probe)
    });
    max_relative_error(&analytic.flatten(), &numeric, FD_FLOOR)
}

const ACTS: [Activation; 4] = [Activation::Identity, Activation::Relu, Activation::Tanh, Activation::Sigmoid];

/// Dense layer, loss `Σ r ⊙ y`; parameters and inputs.
pub fn dense_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (inp, out, batch) = (rng.random_range(1..7), rng.random_range(1..7), rng.random_range(1..5));
    let layer = DenseLayer::<f64>::new(inp, out, ACTS[seed as usize % 4], &mut rng);
    let x = Tensor2::from_vec(batch, inp, normal_vec(&mut rng, batch * inp)).unwrap();
    let r = Tensor2::from_vec(batch, out, normal_vec(&mut rng, batch * out)).unwrap();
    let loss = |l: &DenseLayer<f64>, x: &Tensor2<f64>| dot(l.forward(x).unwrap().data(), r.data());
    let (gx, grads) = layer.backward(&x, &r).unwrap();
    let e_params = params_error(&layer, &grads, |l| loss(l, &x));
    let nx = numerical_gradient(x.data(), FD_STEP, |v| loss(&layer, &Tensor2::from_vec(batch, inp, v.to_vec()).unwrap()));
    e_params.max(max_relative_error(gx.data(), &nx, FD_FLOOR))
}

/// Three-step LSTM unroll, loss `Σ_t r_t·h_t + q·c_T`; parameters and inputs.
pub fn lstm_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let (inp, hid) = (rng.random_range(1..6), rng.random_range(1..6));
    let cell = LstmCell::<f64>::new(inp, hid, &mut rng);
    let xs: Vec<Vec<f64>> = (0..3).map(|_| normal_vec(&mut rng, inp)).collect();
    let rs: Vec<Vec<f64>> = (0..3).map(|_| normal_vec(&mut rng, hid)).collect();
    let q = normal_vec(&mut rng, hid);
    let loss = |c: &LstmCell<f64>, xs: &[Vec<f64>]| {
        let steps = c.forward_sequence(xs).unwrap();
        let mut l: f64 = steps.iter().zip(&rs).map(|(s, r)| dot(&s.h, r)).sum();
        l += dot(&steps.last().unwrap().c, &q);
        l
    };
    let steps = cell.forward_sequence(&xs).unwrap();
    let mut grads = LstmGrads::zeros_like(&cell);
    let mut dh_next = vec![0.0; hid];
    let mut dc = q.clone();
    let mut dxs = vec![Vec::new(); 3];
    for t in (0..3).rev() {
        let dh: Vec<f64> = rs[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
        let (dx, dh_prev, dc_prev) = cell.backward(&steps[t], &dh, &dc, &mut grads);
        dxs[t] = dx;
        dh_next = dh_prev;
        dc = dc_prev;
    }
    let e_params = params_error(&cell, &grads, |c| loss(c, &xs));
    let flat_x: Vec<f64> = xs.concat();
    let nx = numerical_gradient(&flat_x, FD_STEP, |v| {
        let seq: Vec<Vec<f64>> = v.chunks(inp).map(<[f64]>::to_vec).collect();
        loss(&cell, &seq)
    });
    e_params.max(max_relative_error(&dxs.concat(), &nx, FD_FLOOR))
}

/// MSE, softmax cross-entropy and softmax entropy against their inputs.
pub fn losses_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let n = rng.random_range(2..9);
    let pred = normal_vec(&mut rng, n);
    let target = normal_vec(&mut rng, n);
    let (_, g) = mse(&pred, &target).unwrap();
    let e1 = max_relative_error(&g, &numerical_gradient(&pred, FD_STEP, |p| mse(p, &target).unwrap().0), FD_FLOOR);

    let logits: Vec<f64> = normal_vec(&mut rng, n).iter().map(|v| 3.0 * v).collect();
    let label = rng.random_range(0..n);
    let (_, g) = softmax_cross_entropy(&logits, label).unwrap();
    let e2 = max_relative_error(
        &g,
        &numerical_gradient(&logits, FD_STEP, |z| softmax_cross_entropy(z, label).unwrap().0),
        FD_FLOOR,
    );

    let (_, g) = softmax_entropy(&logits);
    let e3 = max_relative_error(&g, &numerical_gradient(&logits, FD_STEP, |z| softmax_entropy(z).0), FD_FLOOR);
    e1.max(e2).max(e3)
}

fn mlp_mse_error(mlp: &Mlp<f64>, x: &Tensor2<f64>, y: &Tensor2<f64>) -> f64 {
    let (_, grads) = mlp.mse_grads(x, y).unwrap();
    params_error(mlp, &grads, |m| mse(m.forward(x).unwrap().data(), y.data()).unwrap().0)
}

/// Random-depth MLP under MSE.
pub fn mlp_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let depth = rng.random_range(1..4);
    let sizes: Vec<usize> = (0..=depth + 1).map(|_| rng.random_range(1..7)).collect();
    let mlp = Mlp::<f64>::new(&sizes, ACTS[seed as usize % 4], &mut rng);
    let batch = rng.random_range(1..6);
    let x = Tensor2::from_vec(batch, sizes[0], normal_vec(&mut rng, batch * sizes[0])).unwrap();
    let out = *sizes.last().unwrap();
    let y = Tensor2::from_vec(batch, out, normal_vec(&mut rng, batch * out)).unwrap();
    mlp_mse_error(&mlp, &x, &y)
}

/// The MLP cost model's training loss: padded block costs in, scalar out.
pub fn mlp_cost_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let pad = 20;
    let hidden = rng.random_range(2..9);
    let mlp = Mlp::<f64>::new(&[pad, hidden, hidden, 1], Activation::Relu, &mut rng);
    let batch = rng.random_range(2..9);
    let x = Tensor2::from_vec(batch, pad, normal_vec(&mut rng, batch * pad)).unwrap();
    let y = Tensor2::from_vec(batch, 1, normal_vec(&mut rng, batch)).unwrap();
    mlp_mse_error(&mlp, &x, &y)
}

/// The LSTM cost model's packed batch loss over variable-length sequences.
pub fn lstm_cost_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let hidden = rng.random_range(2..7);
    let model = LstmRegressor::<f64>::new(9, hidden, &mut rng);
    let batch = rng.random_range(1..6);
    let seqs: Vec<Vec<Vec<f64>>> = (0..batch)
        .map(|_| {
            let len = rng.random_range(1..7);
            (0..len).map(|_| normal_vec(&mut rng, 9)).collect()
        })
        .collect();
    let targets = normal_vec(&mut rng, batch);
    let refs: Vec<&[Vec<f64>]> = seqs.iter().map(Vec::as_slice).collect();
    let (_, grads) = model.batch_loss(&refs, &targets).unwrap();
    params_error(&model, &grads, |m| m.batch_loss(&refs, &targets).unwrap().0)
}
