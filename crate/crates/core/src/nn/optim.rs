use serde::{Deserialize, Serialize};

use super::archive::TensorArchive;
use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// SGD or Adam state. Moment buffers are created lazily on the first step
/// and follow the slice layout of the parameter set they are applied to.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub learning_rate: T,
    pub step_count: u64,
    pub first_moment: Vec<Vec<T>>,
    pub second_moment: Vec<Vec<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn sgd(learning_rate: T) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: T) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn new(kind: OptimizerKind, learning_rate: T) -> Self {
        Self {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step<P: ParamSet<T> + ?Sized, G: ParamSet<T> + ?Sized>(&mut self, params: &mut P, grads: &G) -> Result<()> {
        let gs = grads.param_slices();
        let mut ps = params.param_slices_mut();
        if gs.len() != ps.len() || gs.iter().zip(&ps).any(|(g, p)| g.len() != p.len()) {
            return Err(Error::Shape("gradient layout does not match parameters".into()));
        }
        if gs.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in ps.iter_mut().zip(&gs) {
                    for (a, &b) in p.iter_mut().zip(g.iter()) {
                        *a -= self.learning_rate * b;
                    }
                }
                self.step_count += 1;
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = gs.iter().map(|g| vec![T::zero(); g.len()]).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != gs.len()
                    || self.first_moment.iter().zip(&gs).any(|(m, g)| m.len() != g.len())
                {
                    return Err(Error::Shape("adam moments do not match parameters".into()));
                }
                self.step_count += 1;
                let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
                let t = self.step_count as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for (slot, (p, g)) in ps.iter_mut().zip(&gs).enumerate() {
                    let m = &mut self.first_moment[slot];
                    let v = &mut self.second_moment[slot];
                    for k in 0..p.len() {
                        let gk = g[k];
                        m[k] = b1 * m[k] + (T::one() - b1) * gk;
                        v[k] = b2 * v[k] + (T::one() - b2) * gk * gk;
                        let m_hat = m[k] / c1;
                        let v_hat = v[k] / c2;
                        p[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

impl<T: Scalar> Optimizer<T> {
    /// Stores the step count and moment buffers under `prefix`.
    pub fn save_into(&self, archive: &mut TensorArchive, prefix: &str) {
        let header = [self.step_count as f64, self.first_moment.len() as f64];
        archive.push(format!("{prefix}.header"), vec![2], &header);
        for (k, (m, v)) in self.first_moment.iter().zip(&self.second_moment).enumerate() {
            archive.push(format!("{prefix}.m{k}"), vec![m.len()], m);
            archive.push(format!("{prefix}.v{k}"), vec![v.len()], v);
        }
    }

    /// Inverse of [`Optimizer::save_into`]; kind and learning rate come
    /// from the caller's configuration.
    pub fn load_from(archive: &TensorArchive, prefix: &str, kind: OptimizerKind, learning_rate: T) -> Result<Self> {
        let header = &archive.get(&format!("{prefix}.header"))?.values;
        if header.len() != 2 {
            return Err(Error::Checkpoint(format!("{prefix}.header has {} values", header.len())));
        }
        let mut opt = Self::new(kind, learning_rate);
        opt.step_count = header[0] as u64;
        for k in 0..header[1] as usize {
            opt.first_moment.push(archive.read_vec(&format!("{prefix}.m{k}"))?);
            opt.second_moment.push(archive.read_vec(&format!("{prefix}.v{k}"))?);
        }
        Ok(opt)
    }
}
