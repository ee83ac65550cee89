use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tensor::{gemm, Tensor2, View};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(T::zero()),
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => sigmoid(v),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Activation::Identity),
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            _ => None,
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Fully connected layer `act(x Wᵀ + b)` with `W` stored `out × in`.
///
/// The `*_prefix` methods run the layer restricted to its leading
/// `out' × in'` block, which is how supernet candidates share storage.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    /// Uniform(−1/√fan_in, 1/√fan_in) initialization for weights and bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let mut draw = || T::lit(rng.random_range(-bound..=bound));
        let weight: Vec<T> = (0..inputs * outputs).map(|_| draw()).collect();
        let bias: Vec<T> = (0..outputs).map(|_| draw()).collect();
        Self {
            weight: Tensor2::from_vec(outputs, inputs, weight).expect("finite init"),
            bias,
            activation,
        }
    }

    pub fn from_parts(weight: Tensor2<T>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Shape(format!(
                "bias length {} for {} outputs",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Tensor2<T>) -> Result<Tensor2<T>> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!(
                "dense input has {} columns, layer expects {}",
                x.cols(),
                self.inputs()
            )));
        }
        Ok(self.forward_prefix(x, self.outputs())?.1)
    }

    /// Returns `(pre_activation, output)` using the leading `outputs × x.cols()` block.
    pub fn forward_prefix(&self, x: &Tensor2<T>, outputs: usize) -> Result<(Tensor2<T>, Tensor2<T>)> {
        self.check_prefix(x.cols(), outputs)?;
        let mut pre = Tensor2::zeros(x.rows(), outputs);
        for r in 0..x.rows() {
            pre.row_mut(r).copy_from_slice(&self.bias[..outputs]);
        }
        gemm(
            T::one(),
            View::row_major(x.data(), x.rows(), x.cols()),
            self.block(outputs, x.cols()).t(),
            T::one(),
            pre.data_mut(),
        );
        let act = self.activation;
        let y = pre.map(|v| act.apply(v));
        Ok((pre, y))
    }

    pub fn backward(&self, x: &Tensor2<T>, grad_out: &Tensor2<T>) -> Result<(Tensor2<T>, DenseGrads<T>)> {
        if x.cols() != self.inputs() || grad_out.cols() != self.outputs() {
            return Err(Error::Shape("dense backward shapes".into()));
        }
        self.backward_prefix(x, grad_out)
    }

    /// Gradients for the leading `grad_out.cols() × x.cols()` block.
    pub fn backward_prefix(&self, x: &Tensor2<T>, grad_out: &Tensor2<T>) -> Result<(Tensor2<T>, DenseGrads<T>)> {
        let outputs = grad_out.cols();
        let inputs = x.cols();
        if grad_out.rows() != x.rows() {
            return Err(Error::Shape("batch sizes differ".into()));
        }
        let (pre, y) = self.forward_prefix(x, outputs)?;
        let mut dz = Tensor2::zeros(x.rows(), outputs);
        for ((d, (&p, &v)), &g) in dz.data_mut().iter_mut().zip(pre.data().iter().zip(y.data())).zip(grad_out.data()) {
            *d = g * self.activation.derivative(p, v);
        }
        let mut gb = vec![T::zero(); outputs];
        for row in dz.data().chunks_exact(outputs.max(1)) {
            for (b, &d) in gb.iter_mut().zip(row) {
                *b += d;
            }
        }
        let dz_view = View::row_major(dz.data(), x.rows(), outputs);
        let mut gw = Tensor2::zeros(outputs, inputs);
        gemm(T::one(), dz_view.t(), View::row_major(x.data(), x.rows(), inputs), T::zero(), gw.data_mut());
        let mut gx = Tensor2::zeros(x.rows(), inputs);
        gemm(T::one(), dz_view, self.block(outputs, inputs), T::zero(), gx.data_mut());
        Ok((gx, DenseGrads { weight: gw, bias: gb }))
    }

    /// Leading `outputs × inputs` block of the weight matrix.
    fn block(&self, outputs: usize, inputs: usize) -> View<'_, T> {
        View::strided(self.weight.data(), outputs, inputs, self.inputs())
    }

    /// In-place SGD on the leading block covered by `grads`.
    pub fn sgd_prefix(&mut self, grads: &DenseGrads<T>, lr: T) -> Result<()> {
        let (outputs, inputs) = grads.weight.shape();
        self.check_prefix(inputs, outputs)?;
        if !grads.weight.is_finite() || grads.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dense gradient".into()));
        }
        let stride = self.inputs();
        let w = self.weight.data_mut();
        for j in 0..outputs {
            for k in 0..inputs {
                w[j * stride + k] -= lr * grads.weight.get(j, k);
            }
            self.bias[j] -= lr * grads.bias[j];
        }
        Ok(())
    }

    fn check_prefix(&self, inputs: usize, outputs: usize) -> Result<()> {
        if inputs > self.inputs() || outputs > self.outputs() || outputs == 0 {
            return Err(Error::Shape(format!(
                "prefix {outputs}x{inputs} outside {}x{} layer",
                self.outputs(),
                self.inputs()
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> DenseGrads<T> {
    pub fn zeros_like(layer: &DenseLayer<T>) -> Self {
        Self {
            weight: Tensor2::zeros(layer.outputs(), layer.inputs()),
            bias: vec![T::zero(); layer.outputs()],
        }
    }
}

impl<T: Scalar> ParamSet<T> for DenseLayer<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        vec![self.weight.data(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}

impl<T: Scalar> ParamSet<T> for DenseGrads<T> {
    fn param_slices(&self) -> Vec<&[T]> {
        vec![self.weight.data(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        vec![self.weight.data_mut(), &mut self.bias]
    }
}
