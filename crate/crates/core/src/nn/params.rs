use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An ordered collection of parameter (or gradient) buffers.
///
/// Models and their gradient structs implement this with the same slice
/// order so optimizers and gradient checks can walk them in lockstep.
pub trait ParamSet<T: Scalar> {
    fn param_slices(&self) -> Vec<&[T]>;
    fn param_slices_mut(&mut self) -> Vec<&mut [T]>;

    fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    fn flatten(&self) -> Vec<T> {
        self.param_slices().concat()
    }

    fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        let total = self.num_params();
        if flat.len() != total {
            return Err(Error::Shape(format!(
                "flat parameter vector has {} values, expected {total}",
                flat.len()
            )));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            let n = s.len();
            s.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    fn fill_zero(&mut self) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    /// `self += other * scale`, slice by slice.
    fn add_scaled<P: ParamSet<T>>(&mut self, other: &P, scale: T) -> Result<()> {
        let src = other.param_slices();
        let mut dst = self.param_slices_mut();
        if src.len() != dst.len() {
            return Err(Error::Shape("parameter set layouts differ".into()));
        }
        for (d, s) in dst.iter_mut().zip(src) {
            if d.len() != s.len() {
                return Err(Error::Shape("parameter slice lengths differ".into()));
            }
            for (a, b) in d.iter_mut().zip(s) {
                *a += *b * scale;
            }
        }
        Ok(())
    }
}
