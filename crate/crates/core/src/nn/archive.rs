//! Flat binary tensor list shared by controller, evaluator and cost-model
//! checkpoints.
//!
//! Layout (little endian):
//! ```text
//! magic "NFTA" | u32 version | str kind | str meta_json | u32 count
//! count × ( str name | u32 ndim | ndim × u64 dim | Π dim × f64 )
//! u64 fnv1a-64 checksum of every preceding byte
//! ```
//! where `str` is a `u32` byte length followed by UTF-8 bytes.

use std::path::Path;

use super::params::ParamSet;
use super::tensor::Tensor2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"NFTA";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorArchive {
    pub kind: String,
    pub meta: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl TensorArchive {
    pub fn new(kind: impl Into<String>, meta: serde_json::Value) -> Self {
        Self {
            kind: kind.into(),
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push<T: Scalar>(&mut self, name: impl Into<String>, shape: Vec<usize>, values: &[T]) {
        self.tensors.push(NamedTensor {
            name: name.into(),
            shape,
            values: values.iter().map(|v| v.as_f64()).collect(),
        });
    }

    pub fn push_matrix<T: Scalar>(&mut self, name: impl Into<String>, t: &Tensor2<T>) {
        self.push(name, vec![t.rows(), t.cols()], t.data());
    }

    pub fn get(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("tensor {name:?} missing")))
    }

    /// Copies a stored tensor into `dst`, which must have the same length.
    pub fn read_into<T: Scalar>(&self, name: &str, dst: &mut [T]) -> Result<()> {
        let t = self.get(name)?;
        if t.values.len() != dst.len() {
            return Err(Error::Checkpoint(format!(
                "tensor {name:?} has {} values, expected {}",
                t.values.len(),
                dst.len()
            )));
        }
        for (d, &v) in dst.iter_mut().zip(&t.values) {
            *d = T::lit(v);
        }
        Ok(())
    }

    pub fn read_vec<T: Scalar>(&self, name: &str) -> Result<Vec<T>> {
        Ok(self.get(name)?.values.iter().map(|&v| T::lit(v)).collect())
    }

    /// Stores every parameter buffer of `params` as `prefix.<index>`.
    pub fn push_params<T: Scalar, P: ParamSet<T> + ?Sized>(&mut self, prefix: &str, params: &P) {
        for (k, s) in params.param_slices().into_iter().enumerate() {
            self.push(format!("{prefix}.{k}"), vec![s.len()], s);
        }
    }

    /// Fills `params` from buffers written by [`TensorArchive::push_params`].
    /// Lengths are checked before anything is written.
    pub fn read_params<T: Scalar, P: ParamSet<T> + ?Sized>(&self, prefix: &str, params: &mut P) -> Result<()> {
        let mut slices = params.param_slices_mut();
        for (k, s) in slices.iter().enumerate() {
            let name = format!("{prefix}.{k}");
            let got = self.get(&name)?.values.len();
            if got != s.len() {
                return Err(Error::Checkpoint(format!("tensor {name:?} has {got} values, expected {}", s.len())));
            }
        }
        for (k, s) in slices.iter_mut().enumerate() {
            self.read_into(&format!("{prefix}.{k}"), s)?;
        }
        Ok(())
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "kind mismatch: file holds {:?}, expected {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        put_str(&mut out, &self.meta.to_string());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            put_str(&mut out, &t.name);
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &t.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 12 {
            return Err(Error::Checkpoint("file truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if &body[..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != ARCHIVE_VERSION {
            return Err(Error::Checkpoint(format!(
                "version mismatch: file v{version}, supported v{ARCHIVE_VERSION}"
            )));
        }
        if fnv1a64(body) != stored {
            return Err(Error::Checkpoint("checksum mismatch (corrupt or truncated file)".into()));
        }
        let kind = r.string()?;
        let meta = serde_json::from_str(&r.string()?)?;
        let count = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let shape = (0..ndim).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let values = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push(NamedTensor { name, shape, values });
        }
        if r.pos != body.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(Self { kind, meta, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid utf-8".into()))
    }
}
