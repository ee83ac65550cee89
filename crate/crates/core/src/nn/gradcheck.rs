//! Central finite-difference gradient checking.

use crate::scalar::Scalar;

/// Numerical gradient of `f` at `x` by central differences with step `h`.
pub fn numerical_gradient<T: Scalar>(x: &[T], h: T, mut f: impl FnMut(&[T]) -> T) -> Vec<T> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let up = f(&probe);
            probe[k] = orig - h;
            let down = f(&probe);
            probe[k] = orig;
            (up - down) / two_h
        })
        .collect()
}

/// Max over entries of `|a − n| / max(|a| + |n|, floor)`.
///
/// The floor keeps entries whose true gradient is ~0 from dominating via
/// finite-difference noise.
pub fn max_relative_error<T: Scalar>(analytic: &[T], numeric: &[T], floor: T) -> T {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / (a.abs() + n.abs()).max(floor))
        .fold(T::zero(), T::max)
}
