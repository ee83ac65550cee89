//! Synthetic regression task `y = sin(W x)` used by the supernet and by
//! final training.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::nn::Tensor2;
use crate::rng::stream_rng;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionTask {
    pub input_dim: usize,
    pub output_dim: usize,
    pub batch_size: usize,
    /// `output_dim × input_dim`.
    pub w: Tensor2<f64>,
    pub train_x: Tensor2<f64>,
    pub train_y: Tensor2<f64>,
    pub test_x: Tensor2<f64>,
    pub test_y: Tensor2<f64>,
}

impl RegressionTask {
    /// Inputs are uniform on [−1, 1]; `W` has N(0, (frequency²)/input_dim)
    /// entries. Everything derives from `seed`.
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        train_size: usize,
        test_size: usize,
        batch_size: usize,
        frequency: f64,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || train_size == 0 || test_size == 0 || batch_size == 0 {
            return Err(Error::InvalidArgument("regression task sizes must be positive".into()));
        }
        let mut rng = stream_rng(seed, "dataset/weights");
        let scale = frequency / (input_dim as f64).sqrt();
        let w_data = (0..output_dim * input_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect();
        let w = Tensor2::from_vec(output_dim, input_dim, w_data)?;
        let split = |name: &str, n: usize| -> Result<(Tensor2<f64>, Tensor2<f64>)> {
            let mut rng = stream_rng(seed, name);
            let xs: Vec<f64> = (0..n * input_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let ys: Vec<f64> = xs.chunks(input_dim).flat_map(|x| target(&w, x)).collect();
            Ok((Tensor2::from_vec(n, input_dim, xs)?, Tensor2::from_vec(n, output_dim, ys)?))
        };
        let (train_x, train_y) = split("dataset/train", train_size)?;
        let (test_x, test_y) = split("dataset/test", test_size)?;
        Ok(Self {
            input_dim,
            output_dim,
            batch_size,
            w,
            train_x,
            train_y,
            test_x,
            test_y,
        })
    }

    pub fn target(&self, x: &[f64]) -> Vec<f64> {
        target(&self.w, x)
    }

    /// `batch_size` training rows drawn with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, rng: &mut R) -> (Tensor2<f64>, Tensor2<f64>) {
        let n = self.train_x.rows();
        let idx: Vec<usize> = (0..self.batch_size).map(|_| rng.random_range(0..n)).collect();
        let x = idx.iter().flat_map(|&i| self.train_x.row(i).to_vec()).collect();
        let y = idx.iter().flat_map(|&i| self.train_y.row(i).to_vec()).collect();
        (
            Tensor2::from_vec(idx.len(), self.input_dim, x).expect("rows from a valid tensor"),
            Tensor2::from_vec(idx.len(), self.output_dim, y).expect("rows from a valid tensor"),
        )
    }

    /// Variance of every target value in the held-out split.
    pub fn test_variance(&self) -> f64 {
        let v = self.test_y.data();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / v.len() as f64
    }
}

fn target(w: &Tensor2<f64>, x: &[f64]) -> Vec<f64> {
    (0..w.rows())
        .map(|r| w.row(r).iter().zip(x).map(|(a, b)| a * b).sum::<f64>().sin())
        .collect()
}
