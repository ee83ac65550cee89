//! Synthetic device standing in for real profiling hardware.
//!
//! Primitive cost is proportional to the block's MAC count (1 ms or 2 mJ
//! per million MACs) with a ±10% jitter fixed per primitive and seed.
//! Whole-network cost is deliberately not the sum of its blocks:
//!
//! * `gpu_like` latency: `c0 + c1·S + c2·√(Σ lᵢ²) + c3·n`
//! * `fpga_like` energy: `c0 + c1·S + c2·S^0.85`
//!
//! with `S = Σ lᵢ`, `n` the block count, and a multiplicative
//! `(1 + σ·ε)` Gaussian noise factor seeded by the block list.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profiling::PrimitiveKey;
use crate::error::{Error, Result};
use crate::nn::archive::fnv1a64;
use crate::rng::{derive_seed, unit_from_hash};
use crate::space::BlockFeature;

pub const GPU_LIKE_COEFFS: [f64; 4] = [0.5, 0.7, 0.4, 0.02];
pub const FPGA_LIKE_COEFFS: [f64; 3] = [1.0, 0.6, 0.8];
pub const FPGA_ENERGY_EXPONENT: f64 = 0.85;
pub const DEFAULT_NOISE: f64 = 0.01;
pub const PRIMITIVE_JITTER: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    GpuLike,
    FpgaLike,
}

impl DeviceKind {
    pub fn name(self) -> &'static str {
        match self {
            DeviceKind::GpuLike => "gpu_like",
            DeviceKind::FpgaLike => "fpga_like",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "gpu_like" => Some(DeviceKind::GpuLike),
            "fpga_like" => Some(DeviceKind::FpgaLike),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSimulator {
    pub kind: DeviceKind,
    pub coeffs: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Cost units per million MACs.
    pub primitive_scale: f64,
    pub primitive_jitter: f64,
}

impl DeviceSimulator {
    pub fn gpu_like(seed: u64) -> Self {
        Self {
            kind: DeviceKind::GpuLike,
            coeffs: GPU_LIKE_COEFFS.to_vec(),
            noise_sigma: DEFAULT_NOISE,
            seed,
            primitive_scale: 1.0,
            primitive_jitter: PRIMITIVE_JITTER,
        }
    }

    pub fn fpga_like(seed: u64) -> Self {
        Self {
            kind: DeviceKind::FpgaLike,
            coeffs: FPGA_LIKE_COEFFS.to_vec(),
            noise_sigma: DEFAULT_NOISE,
            seed,
            primitive_scale: 2.0,
            primitive_jitter: PRIMITIVE_JITTER,
        }
    }

    pub fn new(kind: DeviceKind, seed: u64) -> Self {
        match kind {
            DeviceKind::GpuLike => Self::gpu_like(seed),
            DeviceKind::FpgaLike => Self::fpga_like(seed),
        }
    }

    pub fn with_coeffs(mut self, coeffs: &[f64]) -> Self {
        self.coeffs = coeffs.to_vec();
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn metric(&self) -> &'static str {
        match self.kind {
            DeviceKind::GpuLike => "latency_ms",
            DeviceKind::FpgaLike => "energy_mj",
        }
    }

    pub fn primitive_cost(&self, key: &PrimitiveKey) -> f64 {
        let u = unit_from_hash(derive_seed(self.seed, &key.to_string()));
        let jitter = 1.0 + self.primitive_jitter * (2.0 * u - 1.0);
        key.macs() / 1e6 * self.primitive_scale * jitter
    }

    /// Network cost before noise, from the per-block costs.
    pub fn noiseless_cost(&self, block_costs: &[f64]) -> f64 {
        let s: f64 = block_costs.iter().sum();
        let c = |i: usize| self.coeffs.get(i).copied().unwrap_or(0.0);
        match self.kind {
            DeviceKind::GpuLike => {
                let l2 = block_costs.iter().map(|l| l * l).sum::<f64>().sqrt();
                c(0) + c(1) * s + c(2) * l2 + c(3) * block_costs.len() as f64
            }
            DeviceKind::FpgaLike => c(0) + c(1) * s + c(2) * s.powf(FPGA_ENERGY_EXPONENT),
        }
    }

    pub fn network_true_cost(&self, blocks: &[BlockFeature]) -> Result<f64> {
        if blocks.is_empty() {
            return Err(Error::Empty("network cost of an empty block list".into()));
        }
        let costs: Vec<f64> = blocks.iter().map(|b| b.cost).collect();
        let base = self.noiseless_cost(&costs);
        if self.noise_sigma == 0.0 {
            return Ok(base);
        }
        let mut bytes = Vec::with_capacity(blocks.len() * 64);
        for b in blocks {
            bytes.extend_from_slice(&b.cost.to_le_bytes());
            for v in b.in_shape.iter().chain(&b.out_shape).chain([&b.kernel, &b.stride]) {
                bytes.extend_from_slice(&(*v as u64).to_le_bytes());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed ^ fnv1a64(&bytes), "network-noise"));
        let eps: f64 = StandardNormal.sample(&mut rng);
        Ok(base * (1.0 + self.noise_sigma * eps))
    }
}
