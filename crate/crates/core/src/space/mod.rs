//! Search spaces: decision structure, sampling, mutation, enumeration and
//! the textual genotype grammar.

pub mod blockwise;
pub mod cell;
pub mod toy_mlp;

use rand::Rng;

pub use blockwise::{BlockFeature, BlockwiseSpace, StageLayout};
pub use cell::CellSpace;
pub use toy_mlp::ToyMlpSpace;

use crate::error::{Error, Result};
use crate::rollout::DiscreteRollout;

/// Largest space [`SearchSpace::enumerate`] will materialize.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum SearchSpace {
    Cell(CellSpace),
    Blockwise(BlockwiseSpace),
    ToyMlp(ToyMlpSpace),
}

impl SearchSpace {
    pub fn type_name(&self) -> &'static str {
        match self {
            SearchSpace::Cell(_) => "cell",
            SearchSpace::Blockwise(_) => "blockwise",
            SearchSpace::ToyMlp(_) => "toy_mlp",
        }
    }

    /// Number of values each decision position can take.
    pub fn cardinalities(&self) -> Vec<usize> {
        match self {
            SearchSpace::Cell(s) => s.cardinalities(),
            SearchSpace::Blockwise(s) => s.cardinalities(),
            SearchSpace::ToyMlp(s) => s.cardinalities(),
        }
    }

    pub fn num_decisions(&self) -> usize {
        self.cardinalities().len()
    }

    pub fn validate(&self, genotype: &[usize]) -> Result<()> {
        let cards = self.cardinalities();
        if genotype.len() != cards.len() {
            return Err(Error::Genotype(format!(
                "{} decisions given, {} space expects {}",
                genotype.len(),
                self.type_name(),
                cards.len()
            )));
        }
        for (pos, (&d, &c)) in genotype.iter().zip(&cards).enumerate() {
            if d >= c {
                return Err(Error::Genotype(format!("decision {d} at position {pos} exceeds cardinality {c}")));
            }
        }
        Ok(())
    }

    /// Rewrites inert decisions to 0 so equal programs have equal genotypes.
    pub fn canonicalize(&self, genotype: &[usize]) -> Vec<usize> {
        match self {
            SearchSpace::Blockwise(s) => s.canonicalize(genotype),
            _ => genotype.to_vec(),
        }
    }

    pub fn same_program(&self, a: &[usize], b: &[usize]) -> bool {
        self.canonicalize(a) == self.canonicalize(b)
    }

    /// Positions whose value affects the encoded program.
    pub fn active_positions(&self, genotype: &[usize]) -> Vec<usize> {
        match self {
            SearchSpace::Blockwise(s) => s.active_positions(genotype),
            _ => (0..genotype.len()).collect(),
        }
    }

    pub fn random_genotype<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.cardinalities().into_iter().map(|c| rng.random_range(0..c)).collect()
    }

    /// Every decision drawn uniformly over its cardinality.
    pub fn random_rollout<R: Rng + ?Sized>(&self, rng: &mut R) -> DiscreteRollout {
        DiscreteRollout::new(self.random_genotype(rng))
    }

    /// Resamples one uniformly chosen active position (cardinality > 1) to a
    /// different value.
    pub fn mutate_genotype<R: Rng + ?Sized>(&self, genotype: &[usize], rng: &mut R) -> Result<Vec<usize>> {
        self.validate(genotype)?;
        let cards = self.cardinalities();
        let choices: Vec<usize> = self
            .active_positions(genotype)
            .into_iter()
            .filter(|&p| cards[p] > 1)
            .collect();
        if choices.is_empty() {
            return Err(Error::Genotype("no mutable position in genotype".into()));
        }
        let pos = choices[rng.random_range(0..choices.len())];
        let mut child = genotype.to_vec();
        let shift = rng.random_range(1..cards[pos]);
        child[pos] = (genotype[pos] + shift) % cards[pos];
        Ok(child)
    }

    pub fn mutate<R: Rng + ?Sized>(&self, rollout: &DiscreteRollout, rng: &mut R) -> Result<DiscreteRollout> {
        Ok(DiscreteRollout::new(self.mutate_genotype(&rollout.genotype, rng)?))
    }

    /// Number of distinct programs (canonical genotypes).
    pub fn size(&self) -> u128 {
        match self {
            SearchSpace::Blockwise(s) => s.size(),
            _ => self.cardinalities().iter().map(|&c| c as u128).product(),
        }
    }

    /// Every canonical genotype exactly once; refuses spaces above
    /// [`ENUMERATION_LIMIT`].
    pub fn enumerate(&self) -> Result<Vec<Vec<usize>>> {
        let size = self.size();
        if size > ENUMERATION_LIMIT {
            return Err(Error::TooLarge {
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        Ok(match self {
            SearchSpace::Blockwise(s) => s.enumerate_canonical(),
            _ => odometer(&self.cardinalities()),
        })
    }

    pub fn genotype_to_string(&self, genotype: &[usize]) -> Result<String> {
        self.validate(genotype)?;
        Ok(match self {
            SearchSpace::Cell(s) => s.format(genotype),
            SearchSpace::Blockwise(s) => s.format(genotype),
            SearchSpace::ToyMlp(s) => s.format(genotype),
        })
    }

    /// Parses the textual form; the result is canonical.
    pub fn parse_genotype(&self, text: &str) -> Result<Vec<usize>> {
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        let g = match self {
            SearchSpace::Cell(s) => s.parse(&compact)?,
            SearchSpace::Blockwise(s) => s.parse(&compact)?,
            SearchSpace::ToyMlp(s) => s.parse(&compact)?,
        };
        self.validate(&g)?;
        Ok(g)
    }

    pub fn parse_rollout(&self, text: &str) -> Result<DiscreteRollout> {
        self.parse_genotype(text).map(DiscreteRollout::new)
    }

    /// Concatenated one-hot encoding of the canonical genotype.
    pub fn one_hot(&self, genotype: &[usize]) -> Vec<f64> {
        let canon = self.canonicalize(genotype);
        let cards = self.cardinalities();
        let mut out = vec![0.0; cards.iter().sum()];
        let mut offset = 0;
        for (&d, &c) in canon.iter().zip(&cards) {
            out[offset + d] = 1.0;
            offset += c;
        }
        out
    }

    pub fn as_blockwise(&self) -> Option<&BlockwiseSpace> {
        match self {
            SearchSpace::Blockwise(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_toy_mlp(&self) -> Option<&ToyMlpSpace> {
        match self {
            SearchSpace::ToyMlp(s) => Some(s),
            _ => None,
        }
    }
}

/// All vectors `v` with `v[i] < cards[i]`, last position varying fastest.
pub(crate) fn odometer(cards: &[usize]) -> Vec<Vec<usize>> {
    if cards.contains(&0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur = vec![0; cards.len()];
    loop {
        out.push(cur.clone());
        let mut pos = cards.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            cur[pos] += 1;
            if cur[pos] < cards[pos] {
                break;
            }
            cur[pos] = 0;
        }
    }
}

pub(crate) fn parse_usize(token: &str, what: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| Error::Genotype(format!("{what}: token {token:?} is not a non-negative integer")))
}

pub(crate) fn strip_wrapper<'a>(text: &'a str, open: &str, close: char) -> Result<&'a str> {
    text.strip_prefix(open)
        .and_then(|t| t.strip_suffix(close))
        .ok_or_else(|| Error::Genotype(format!("expected `{open}…{close}`, got {text:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odometer_counts() {
        assert_eq!(odometer(&[2, 3]).len(), 6);
        assert_eq!(odometer(&[]).len(), 1);
        assert_eq!(odometer(&[2, 0]).len(), 0);
    }
}
