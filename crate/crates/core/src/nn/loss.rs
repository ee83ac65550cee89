use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse<T: Scalar>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.is_empty() {
        return Err(Error::Empty("mse on empty input".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape(format!("mse: {} predictions vs {} targets", pred.len(), target.len())));
    }
    let n = T::from_usize(pred.len()).unwrap();
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d * d;
            two * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln() + max;
    logits.iter().map(|&z| z - lse).collect()
}

/// Cross-entropy of a single categorical target; returns `(loss, dloss/dlogits)`.
pub fn softmax_cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if logits.is_empty() {
        return Err(Error::Empty("cross-entropy on empty logits".into()));
    }
    if label >= logits.len() {
        return Err(Error::Shape(format!("label {label} out of {} classes", logits.len())));
    }
    let logp = log_softmax(logits);
    let mut grad: Vec<T> = logp.iter().map(|lp| lp.exp()).collect();
    grad[label] -= T::one();
    Ok((-logp[label], grad))
}

/// Shannon entropy of `softmax(logits)` and its gradient w.r.t. the logits.
pub fn softmax_entropy<T: Scalar>(logits: &[T]) -> (T, Vec<T>) {
    let logp = log_softmax(logits);
    let p: Vec<T> = logp.iter().map(|v| v.exp()).collect();
    let h = -p.iter().zip(&logp).map(|(&a, &b)| a * b).sum::<T>();
    let grad = p.iter().zip(&logp).map(|(&pj, &lj)| -pj * (lj + h)).collect();
    (h, grad)
}
