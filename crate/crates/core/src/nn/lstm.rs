use rand::Rng;

use super::dense::sigmoid;
use super::params::ParamSet;
use super::tensor::{gemm, gemv_prefix, Tensor2, View};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gate order inside the fused weight matrix: input, forget, candidate, output.
pub const GATES: [&str; 4] = ["i", "f", "g", "o"];

/// Single-layer LSTM cell. The four gates share one `4·hidden × (input +
/// hidden)` matrix acting on `[x_t; h_prev]`; gate `q` owns rows
/// `q·hidden .. (q+1)·hidden`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCell<T> {
    pub input_size: usize,
    pub hidden_size: usize,
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmGrads<T> {
    pub weight: Tensor2<T>,
    pub bias: Vec<T>,
}

/// Everything a forward step produced that backward needs.
#[derive(Clone, Debug)]
pub struct LstmStep<T> {
    pub concat: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    pub o: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

/// One time step of a packed batch. Only the first `rows` sequences are
/// still running at this step.
#[derive(Clone, Debug)]
struct PackedStep<T> {
    rows: usize,
    concat: Vec<T>,
    /// Activated gates, `rows × 4·hidden`.
    gates: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

/// Forward trace of [`LstmCell::forward_packed`].
#[derive(Clone, Debug)]
pub struct PackedTrace<T> {
    steps: Vec<PackedStep<T>>,
    /// Final hidden state of every sequence, `batch × hidden`.
    pub last_h: Vec<T>,
}

/// Gate derivatives given upstream `dh`, `dc`. Writes `dz` (4·hidden)
/// and `dc_prev` (hidden).
#[inline]
fn gate_grads<T: Scalar>(gates: &[T], c_prev: &[T], tanh_c: &[T], dh: &[T], dc: &[T], dz: &mut [T], dc_prev: &mut [T]) {
    let n = dh.len();
    let one = T::one();
    let (gi, rest) = gates.split_at(n);
    let (gf, rest) = rest.split_at(n);
    let (gg, go) = rest.split_at(n);
    for k in 0..n {
        let (i, f, g, o, tc) = (gi[k], gf[k], gg[k], go[k], tanh_c[k]);
        let dct = dc[k] + dh[k] * o * (one - tc * tc);
        dc_prev[k] = dct * f;
        dz[k] = dct * g * i * (one - i);
        dz[n + k] = dct * c_prev[k] * f * (one - f);
        dz[2 * n + k] = dct * i * (one - g * g);
        dz[3 * n + k] = dh[k] * tc * o * (one - o);
    }
}

#[inline]
fn activate<T: Scalar>(pre: &mut [T], hidden: usize) {
    for (q, chunk) in pre.chunks_exact_mut(hidden).enumerate() {
        if q == 2 {
            chunk.iter_mut().for_each(|v| *v = v.tanh());
        } else {
            chunk.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
    }
}

impl<T: Scalar> LstmCell<T> {
    /// Uniform(−1/√fan_in, 1/√fan_in) weights, zero biases except the
    /// forget gate which starts at 1.
    pub fn new<R: Rng + ?Sized>(input_size: usize, hidden_size: usize, rng: &mut R) -> Self {
        let fan_in = input_size + hidden_size;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..4 * hidden_size * fan_in)
            .map(|_| T::lit(rng.random_range(-bound..=bound)))
            .collect();
        let mut bias = vec![T::zero(); 4 * hidden_size];
        bias[hidden_size..2 * hidden_size].iter_mut().for_each(|b| *b = T::one());
        Self {
            input_size,
            hidden_size,
            weight: Tensor2::from_vec(4 * hidden_size, fan_in, data).expect("finite init"),
            bias,
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            weight: Tensor2::zeros(4 * hidden_size, input_size + hidden_size),
            bias: vec![T::zero(); 4 * hidden_size],
        }
    }

    fn width(&self) -> usize {
        self.input_size + self.hidden_size
    }

    /// Bias slice of one gate (see [`GATES`]).
    pub fn gate_bias(&self, gate: usize) -> &[T] {
        &self.bias[gate * self.hidden_size..(gate + 1) * self.hidden_size]
    }

    pub fn zero_state(&self) -> (Vec<T>, Vec<T>) {
        (vec![T::zero(); self.hidden_size], vec![T::zero(); self.hidden_size])
    }

    pub fn forward(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> Result<LstmStep<T>> {
        let n = self.hidden_size;
        if x.len() != self.input_size || h_prev.len() != n || c_prev.len() != n {
            return Err(Error::Shape(format!(
                "lstm step got x={}, h={}, c={}; expects x={}, h=c={}",
                x.len(),
                h_prev.len(),
                c_prev.len(),
                self.input_size,
                n
            )));
        }
        let mut concat = Vec::with_capacity(self.width());
        concat.extend_from_slice(x);
        concat.extend_from_slice(h_prev);
        let mut pre = self.bias.clone();
        gemv_prefix(self.weight.data(), self.width(), &concat, &mut pre);
        activate(&mut pre, n);
        let o = pre.split_off(3 * n);
        let g = pre.split_off(2 * n);
        let f = pre.split_off(n);
        let i = pre;
        let c: Vec<T> = (0..n).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h = (0..n).map(|k| o[k] * tanh_c[k]).collect();
        Ok(LstmStep {
            concat,
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            c,
            tanh_c,
            h,
        })
    }

    /// Runs a whole sequence from the zero state.
    pub fn forward_sequence(&self, xs: &[Vec<T>]) -> Result<Vec<LstmStep<T>>> {
        let (mut h, mut c) = self.zero_state();
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let step = self.forward(x, &h, &c)?;
            h.clone_from(&step.h);
            c.clone_from(&step.c);
            steps.push(step);
        }
        Ok(steps)
    }

    /// Backward through one step. `dh` and `dc` are the total gradients
    /// flowing into `h_t` and `c_t`; returns `(dx, dh_prev, dc_prev)` and
    /// accumulates parameter gradients into `grads`.
    pub fn backward(&self, step: &LstmStep<T>, dh: &[T], dc: &[T], grads: &mut LstmGrads<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
        let n = self.hidden_size;
        let gates: Vec<T> = [&step.i, &step.f, &step.g, &step.o].into_iter().flatten().copied().collect();
        let mut dz = vec![T::zero(); 4 * n];
        let mut dc_prev = vec![T::zero(); n];
        gate_grads(&gates, &step.c_prev, &step.tanh_c, dh, dc, &mut dz, &mut dc_prev);
        let width = self.width();
        let mut dconcat = vec![T::zero(); width];
        let w = self.weight.data();
        let gw = grads.weight.data_mut();
        for (k, &d) in dz.iter().enumerate() {
            grads.bias[k] += d;
            if d == T::zero() {
                continue;
            }
            let row = k * width..(k + 1) * width;
            for (g, &x) in gw[row.clone()].iter_mut().zip(&step.concat) {
                *g += d * x;
            }
            for (dx, &wv) in dconcat.iter_mut().zip(&w[row]) {
                *dx += d * wv;
            }
        }
        let dh_prev = dconcat.split_off(self.input_size);
        (dconcat, dh_prev, dc_prev)
    }

    /// Runs a batch of sequences at once. Sequences must be sorted by
    /// non-increasing length so that the ones still running at step `t`
    /// form a prefix of the batch.
    pub fn forward_packed(&self, seqs: &[&[Vec<T>]]) -> Result<PackedTrace<T>> {
        let n = self.hidden_size;
        let (inp, width) = (self.input_size, self.width());
        if seqs.is_empty() || seqs.iter().any(|s| s.is_empty()) {
            return Err(Error::Empty("packed lstm batch needs non-empty sequences".into()));
        }
        if seqs.windows(2).any(|w| w[0].len() < w[1].len()) {
            return Err(Error::InvalidArgument("packed lstm batch must be sorted by decreasing length".into()));
        }
        if let Some(bad) = seqs.iter().flat_map(|s| s.iter()).find(|x| x.len() != inp) {
            return Err(Error::Shape(format!("lstm input has {} features, expects {inp}", bad.len())));
        }
        let batch = seqs.len();
        let mut last_h = vec![T::zero(); batch * n];
        let mut h = vec![T::zero(); batch * n];
        let mut c = vec![T::zero(); batch * n];
        let mut steps = Vec::with_capacity(seqs[0].len());
        for t in 0..seqs[0].len() {
            let rows = seqs.iter().take_while(|s| s.len() > t).count();
            let mut concat = Vec::with_capacity(rows * width);
            for (b, seq) in seqs[..rows].iter().enumerate() {
                concat.extend_from_slice(&seq[t]);
                concat.extend_from_slice(&h[b * n..(b + 1) * n]);
            }
            let mut gates: Vec<T> = Vec::with_capacity(rows * 4 * n);
            for _ in 0..rows {
                gates.extend_from_slice(&self.bias);
            }
            gemm(
                T::one(),
                View::row_major(&concat, rows, width),
                View::row_major(self.weight.data(), 4 * n, width).t(),
                T::one(),
                &mut gates,
            );
            let c_prev = c[..rows * n].to_vec();
            let mut tanh_c = vec![T::zero(); rows * n];
            for b in 0..rows {
                let gb = &mut gates[b * 4 * n..(b + 1) * 4 * n];
                activate(gb, n);
                for k in 0..n {
                    let ck = gb[n + k] * c_prev[b * n + k] + gb[k] * gb[2 * n + k];
                    let tc = ck.tanh();
                    c[b * n + k] = ck;
                    tanh_c[b * n + k] = tc;
                    h[b * n + k] = gb[3 * n + k] * tc;
                }
            }
            let still = seqs.iter().take_while(|s| s.len() > t + 1).count();
            last_h[still * n..rows * n].copy_from_slice(&h[still * n..rows * n]);
            steps.push(PackedStep {
                rows,
                concat,
                gates,
                c_prev,
                tanh_c,
            });
        }
        Ok(PackedTrace { steps, last_h })
    }

    /// Backward through a packed batch given the gradient on every
    /// sequence's final hidden state (`batch × hidden`). Input gradients
    /// are not propagated.
    pub fn backward_packed(&self, trace: &PackedTrace<T>, dh_last: &[T], grads: &mut LstmGrads<T>) -> Result<()> {
        let n = self.hidden_size;
        let width = self.width();
        if dh_last.len() != trace.last_h.len() {
            return Err(Error::Shape(format!(
                "dh_last has {} entries, expects {}",
                dh_last.len(),
                trace.last_h.len()
            )));
        }
        let mut dh: Vec<T> = Vec::new();
        let mut dc: Vec<T> = Vec::new();
        for (t, step) in trace.steps.iter().enumerate().rev() {
            let rows = step.rows;
            // Sequences ending at this step pick up their loss gradient.
            let ended = dh.len() / n;
            dh.extend_from_slice(&dh_last[ended * n..rows * n]);
            dc.resize(rows * n, T::zero());
            let mut dz = vec![T::zero(); rows * 4 * n];
            let mut dc_prev = vec![T::zero(); rows * n];
            for b in 0..rows {
                let hs = b * n..(b + 1) * n;
                gate_grads(
                    &step.gates[b * 4 * n..(b + 1) * 4 * n],
                    &step.c_prev[hs.clone()],
                    &step.tanh_c[hs.clone()],
                    &dh[hs.clone()],
                    &dc[hs.clone()],
                    &mut dz[b * 4 * n..(b + 1) * 4 * n],
                    &mut dc_prev[hs],
                );
            }
            for row in dz.chunks_exact(4 * n) {
                for (g, &d) in grads.bias.iter_mut().zip(row) {
                    *g += d;
                }
            }
            let dz_view = View::row_major(&dz, rows, 4 * n);
            gemm(
                T::one(),
                dz_view.t(),
                View::row_major(&step.concat, rows, width),
                T::one(),
                grads.weight.data_mut(),
            );
            if t > 0 {
                let mut dh_prev = vec![T::zero(); rows * n];
                let w_h = View::strided(&self.weight.data()[self.input_size..], 4 * n, n, width);
                gemm(T::one(), dz_view, w_h, T::zero(), &mut dh_prev);
                dh = dh_prev;
                dc = dc_prev;
            }
        }
        Ok(())
    }
}

impl<T: Scalar> LstmGrads<T> {
    pub fn zeros_like(cell: &LstmCell<T>) -> Self {
        let (r, c) = cell.weight.shape();
        Self {
            weight: Tensor2::zeros(r, c),
            bias: vec![T::zero(); cell.bias.len()],
        }
    }
}

macro_rules! lstm_param_set {
    ($ty:ident) => {
        impl<T: Scalar> ParamSet<T> for $ty<T> {
            fn param_slices(&self) -> Vec<&[T]> {
                vec![self.weight.data(), &self.bias]
            }

            fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
                vec![self.weight.data_mut(), &mut self.bias]
            }
        }
    };
}

lstm_param_set!(LstmCell);
lstm_param_set!(LstmGrads);
