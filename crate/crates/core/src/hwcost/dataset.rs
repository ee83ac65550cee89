use std::collections::HashSet;

use rand::Rng;

use super::device::DeviceSimulator;
use super::profiling::ProfilingTable;
use crate::error::{Error, Result};
use crate::space::{BlockFeature, BlockwiseSpace, SearchSpace};

#[derive(Clone, Debug, PartialEq)]
pub struct CostSample {
    pub genotype: Vec<usize>,
    pub features: Vec<BlockFeature>,
    pub cost: f64,
}

impl CostSample {
    pub fn block_sum(&self) -> f64 {
        self.features.iter().map(|f| f.cost).sum()
    }
}

/// Samples with a genotype-level train/test split.
#[derive(Clone, Debug, PartialEq)]
pub struct CostDataset {
    pub samples: Vec<CostSample>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl CostDataset {
    pub fn train_samples(&self) -> Vec<&CostSample> {
        self.train.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn test_samples(&self) -> Vec<&CostSample> {
        self.test.iter().map(|&i| &self.samples[i]).collect()
    }
}

/// Draws `n_train + n_test` distinct programs uniformly, the first
/// `n_train` forming the training split.
pub fn build_cost_dataset<R: Rng + ?Sized>(
    space: &BlockwiseSpace,
    device: &DeviceSimulator,
    table: &ProfilingTable,
    n_train: usize,
    n_test: usize,
    rng: &mut R,
) -> Result<CostDataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidArgument("train and test sizes must be >= 1".into()));
    }
    let total = n_train + n_test;
    if space.size() < total as u128 {
        return Err(Error::InvalidArgument(format!(
            "space holds {} programs, {total} distinct samples requested",
            space.size()
        )));
    }
    let wrapper = SearchSpace::Blockwise(space.clone());
    let mut seen = HashSet::with_capacity(total);
    let mut samples = Vec::with_capacity(total);
    while samples.len() < total {
        let g = wrapper.canonicalize(&wrapper.random_genotype(rng));
        if !seen.insert(g.clone()) {
            continue;
        }
        let features = space.block_features(&g, table)?;
        let cost = device.network_true_cost(&features)?;
        samples.push(CostSample {
            genotype: g,
            features,
            cost,
        });
    }
    Ok(CostDataset {
        samples,
        train: (0..n_train).collect(),
        test: (n_train..total).collect(),
    })
}
