use rand::Rng;

use super::dense::{Activation, DenseGrads, DenseLayer};
use super::params::ParamSet;
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stack of dense layers; the last layer uses the identity activation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub layers: Vec<DenseLayer<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads<T> {
    pub layers: Vec<DenseGrads<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// `sizes = [in, h1, …, out]`; hidden layers use `hidden_act`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden_act: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last { Activation::Identity } else { hidden_act };
                DenseLayer::new(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().unwrap().outputs()
    }

    /// Returns the input followed by every layer's output.
    pub fn forward_trace(&self, x: &Tensor2<T>) -> Result<Vec<Tensor2<T>>> {
        let mut acts = vec![x.clone()];
        for layer in &self.layers {
            let y = layer.forward(acts.last().unwrap())?;
            acts.push(y);
        }
        Ok(acts)
    }

    pub fn forward(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn backward(&self, trace: &[Tensor2<T>], grad_out: &Tensor2<T>) -> Result<(Tensor2<T>, MlpGrads<T>)> {
        if trace.len() != self.layers.len() + 1 {
            return Err(Error::Shape("trace does not match layer count".into()));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let (gx, gp) = layer.backward(&trace[k], &g)?;
            grads.push(gp);
            g = gx;
        }
        grads.reverse();
        Ok((g, MlpGrads { layers: grads }))
    }

    /// One MSE gradient computation over a batch; returns `(loss, grads)`.
    pub fn mse_grads(&self, x: &Tensor2<T>, y: &Tensor2<T>) -> Result<(T, MlpGrads<T>)> {
        let trace = self.forward_trace(x)?;
        let pred = trace.last().unwrap();
        if pred.shape() != y.shape() {
            return Err(Error::Shape("prediction and target shapes differ".into()));
        }
        let (loss, g) = super::loss::mse(pred.data(), y.data())?;
        let g = Tensor2::from_vec(pred.rows(), pred.cols(), g)?;
        let (_, grads) = self.backward(&trace, &g)?;
        Ok((loss, grads))
    }
}

impl<T: Scalar> MlpGrads<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Self {
            layers: mlp.layers.iter().map(DenseGrads::zeros_like).collect(),
        }
    }
}

impl<T: Scalar> ParamSet<T> for Mlp<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.param_slices_mut()).collect()
    }
}

impl<T: Scalar> ParamSet<T> for MlpGrads<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| l.param_slices_mut()).collect()
    }
}
