//! Table-lookup evaluator: a CSV of `genotype,accuracy` or a synthetic
//! oracle with a known optimum.
//!
//! Synthetic score over canonical genotypes `g` against the optimum `g*`:
//!
//! ```text
//! m_i  = [g_i ≠ g*_i]
//! d    = Σ w_i m_i / Σ w_i                  (w_i ~ U[0.5, 1.5), seeded)
//! p    = Σ_{i<L−1} m_i m_{i+1} / (L − 1)    (0 when L = 1)
//! acc  = 1 − (1 − λ) d − λ p
//! ```
//!
//! so `acc ∈ [0, 1]` and `acc = 1` exactly at `g*` only.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use super::{Evaluator, Objective};
use crate::error::{Error, Result};
use crate::hwcost::{profile_primitives, DeviceSimulator, ProfilingTable};
use crate::nn::TensorArchive;
use crate::rng::stream_rng;
use crate::rollout::DiscreteRollout;
use crate::space::SearchSpace;

pub const DEFAULT_INTERACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticOracle {
    /// Canonical optimum genotype.
    pub optimum: Vec<usize>,
    pub weights: Vec<f64>,
    pub interaction: f64,
}

impl SyntheticOracle {
    /// Uses `optimum` when given, otherwise draws one from `seed`.
    pub fn new(space: &SearchSpace, optimum: Option<Vec<usize>>, interaction: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&interaction) {
            return Err(Error::InvalidArgument(format!("interaction weight {interaction} outside [0, 1]")));
        }
        let mut rng = stream_rng(seed, "evaluator/oracle");
        let weights = (0..space.num_decisions()).map(|_| rng.random_range(0.5..1.5)).collect();
        let optimum = match optimum {
            Some(g) => {
                space.validate(&g)?;
                g
            }
            None => space.random_genotype(&mut rng),
        };
        Ok(Self {
            optimum: space.canonicalize(&optimum),
            weights,
            interaction,
        })
    }

    pub fn score(&self, space: &SearchSpace, genotype: &[usize]) -> f64 {
        let g = space.canonicalize(genotype);
        let miss: Vec<bool> = g.iter().zip(&self.optimum).map(|(a, b)| a != b).collect();
        let total: f64 = self.weights.iter().sum();
        let d = miss.iter().zip(&self.weights).filter(|(m, _)| **m).map(|(_, w)| w).sum::<f64>() / total;
        let p = if miss.len() > 1 {
            miss.windows(2).filter(|w| w[0] && w[1]).count() as f64 / (miss.len() - 1) as f64
        } else {
            0.0
        };
        (1.0 - (1.0 - self.interaction) * d - self.interaction * p).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TabularSource {
    Synthetic(SyntheticOracle),
    /// Canonical genotype string → accuracy.
    File(HashMap<String, f64>),
}

/// Optional hardware metric attached to blockwise rollouts.
#[derive(Clone, Debug, PartialEq)]
pub struct HardwareProbe {
    pub device: DeviceSimulator,
    pub table: ProfilingTable,
}

#[derive(Clone, Debug)]
pub struct TabularEvaluator {
    space: Arc<SearchSpace>,
    objective: Arc<Objective>,
    pub source: TabularSource,
    pub hardware: Option<HardwareProbe>,
}

fn canonical_key(space: &SearchSpace, g: &[usize]) -> Result<String> {
    space.genotype_to_string(&space.canonicalize(g))
}

/// Reads a `genotype,accuracy` CSV; duplicate (canonical) genotypes are an error.
pub fn load_table(space: &SearchSpace, text: &str) -> Result<HashMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "genotype" || &headers[1] != "accuracy" {
        return Err(Error::Parse {
            line: 1,
            msg: "expected header `genotype,accuracy`".into(),
        });
    }
    let mut table = HashMap::new();
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let line = k + 2;
        let at = |e: Error| Error::Parse { line, msg: e.to_string() };
        let g = space.parse_genotype(&record[0]).map_err(at)?;
        let acc: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            msg: format!("accuracy {:?} is not a number", &record[1]),
        })?;
        if !acc.is_finite() {
            return Err(Error::Parse {
                line,
                msg: "accuracy must be finite".into(),
            });
        }
        let key = canonical_key(space, &g)?;
        if table.insert(key.clone(), acc).is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate genotype {key}"),
            });
        }
    }
    Ok(table)
}

impl TabularEvaluator {
    pub fn new(space: Arc<SearchSpace>, objective: Arc<Objective>, source: TabularSource) -> Self {
        Self {
            space,
            objective,
            source,
            hardware: None,
        }
    }

    pub fn synthetic(space: Arc<SearchSpace>, objective: Arc<Objective>, seed: u64) -> Result<Self> {
        let oracle = SyntheticOracle::new(&space, None, DEFAULT_INTERACTION, seed)?;
        Ok(Self::new(space, objective, TabularSource::Synthetic(oracle)))
    }

    pub fn from_file(space: Arc<SearchSpace>, objective: Arc<Objective>, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table = load_table(&space, &text).map_err(|e| e.context(path.display().to_string()))?;
        Ok(Self::new(space, objective, TabularSource::File(table)))
    }

    /// Adds the device's network cost as a metric; blockwise spaces only.
    pub fn with_hardware(mut self, device: DeviceSimulator) -> Result<Self> {
        let space = self
            .space
            .as_blockwise()
            .ok_or_else(|| Error::InvalidArgument("hardware metrics need a blockwise search space".into()))?;
        let table = profile_primitives(space, &device);
        self.hardware = Some(HardwareProbe { device, table });
        Ok(self)
    }

    pub fn accuracy(&self, genotype: &[usize]) -> Result<f64> {
        self.space.validate(genotype)?;
        match &self.source {
            TabularSource::Synthetic(o) => Ok(o.score(&self.space, genotype)),
            TabularSource::File(t) => {
                let key = canonical_key(&self.space, genotype)?;
                t.get(&key)
                    .copied()
                    .ok_or_else(|| Error::Missing(format!("genotype {key} not in table")))
            }
        }
    }
}

impl Evaluator for TabularEvaluator {
    fn type_name(&self) -> &'static str {
        "tabular"
    }

    fn space(&self) -> &Arc<SearchSpace> {
        &self.space
    }

    fn evaluate(&self, rollout: &mut DiscreteRollout) -> Result<()> {
        let acc = self.accuracy(&rollout.genotype)?;
        rollout.perf.insert("acc".into(), acc);
        if let (Some(hw), Some(space)) = (&self.hardware, self.space.as_blockwise()) {
            let features = space.block_features(&rollout.genotype, &hw.table)?;
            let cost = hw.device.network_true_cost(&features)?;
            rollout.perf.insert(hw.device.metric().into(), cost);
        }
        self.objective.apply(rollout);
        Ok(())
    }

    fn save(&self) -> Result<TensorArchive> {
        Ok(TensorArchive::new("evaluator/tabular", serde_json::Value::Null))
    }

    fn load(&mut self, archive: &TensorArchive) -> Result<()> {
        archive.expect_kind("evaluator/tabular")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::CellSpace;

    fn cell_space() -> Arc<SearchSpace> {
        let ops = ["skip", "conv3", "conv5"].map(String::from).to_vec();
        Arc::new(SearchSpace::Cell(CellSpace::new(2, ops).unwrap()))
    }

    #[test]
    fn optimum_scores_one_and_is_unique_argmax() {
        let space = cell_space();
        let oracle = SyntheticOracle::new(&space, None, DEFAULT_INTERACTION, 4).unwrap();
        assert_eq!(oracle.score(&space, &oracle.optimum), 1.0);
        let all = space.enumerate().unwrap();
        let best = all.iter().filter(|g| oracle.score(&space, g) >= 1.0).count();
        assert_eq!(best, 1);
        assert!(all.iter().all(|g| (0.0..=1.0).contains(&oracle.score(&space, g))));
    }

    #[test]
    fn hand_computed_score() {
        let space = cell_space();
        let mut oracle = SyntheticOracle::new(&space, Some(vec![0; 8]), 0.1, 0).unwrap();
        oracle.weights = vec![1.0; 8];
        // mismatches at positions 0 and 1 (adjacent) and 5
        let g = [1, 1, 0, 0, 0, 1, 0, 0];
        let want = 1.0 - 0.9 * 3.0 / 8.0 - 0.1 * 1.0 / 7.0;
        assert!((oracle.score(&space, &g) - want).abs() < 1e-15);
    }

    #[test]
    fn file_table_rejects_duplicates_and_reports_missing() {
        let space = cell_space();
        let g = space.genotype_to_string(&[0; 8]).unwrap();
        let dup = format!("genotype,accuracy\n\"{g}\",0.5\n\"{g}\",0.6\n");
        assert!(matches!(load_table(&space, &dup), Err(Error::Parse { line: 3, .. })));
        let ok = format!("genotype,accuracy\n\"{g}\",0.5\n");
        let table = load_table(&space, &ok).unwrap();
        let eval = TabularEvaluator::new(space.clone(), Arc::new(Objective::default()), TabularSource::File(table));
        let mut r = DiscreteRollout::new(vec![0; 8]);
        eval.evaluate(&mut r).unwrap();
        assert_eq!(r.reward(), Some(0.5));
        let mut missing = DiscreteRollout::new(vec![1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(matches!(eval.evaluate(&mut missing), Err(Error::Missing(_))));
    }
}
