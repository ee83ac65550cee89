//! Small MLP space: per layer a width and an activation.
//!
//! Grammar: `mlp(<width>-<act>,…)`, one entry per layer.

use super::{parse_usize, strip_wrapper};
use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyMlpSpace {
    pub num_layers: usize,
    pub width_choices: Vec<usize>,
    pub activation_choices: Vec<Activation>,
}

impl Default for ToyMlpSpace {
    fn default() -> Self {
        Self {
            num_layers: 3,
            width_choices: vec![8, 16, 32],
            activation_choices: vec![Activation::Relu, Activation::Tanh],
        }
    }
}

impl ToyMlpSpace {
    pub fn new(num_layers: usize, width_choices: Vec<usize>, activation_choices: Vec<Activation>) -> Result<Self> {
        if num_layers == 0 || width_choices.is_empty() || activation_choices.is_empty() {
            return Err(Error::InvalidArgument("toy_mlp space needs layers, widths and activations".into()));
        }
        if width_choices.contains(&0) {
            return Err(Error::InvalidArgument("widths must be positive".into()));
        }
        Ok(Self {
            num_layers,
            width_choices,
            activation_choices,
        })
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        (0..self.num_layers)
            .flat_map(|_| [self.width_choices.len(), self.activation_choices.len()])
            .collect()
    }

    pub fn max_width(&self) -> usize {
        *self.width_choices.iter().max().unwrap()
    }

    /// `(width, activation)` per layer.
    pub fn layers(&self, g: &[usize]) -> Vec<(usize, Activation)> {
        g.chunks(2)
            .map(|c| (self.width_choices[c[0]], self.activation_choices[c[1]]))
            .collect()
    }

    pub fn format(&self, g: &[usize]) -> String {
        let parts: Vec<String> = self
            .layers(g)
            .into_iter()
            .map(|(w, a)| format!("{w}-{}", a.name()))
            .collect();
        format!("mlp({})", parts.join(","))
    }

    pub fn parse(&self, text: &str) -> Result<Vec<usize>> {
        let body = strip_wrapper(text, "mlp(", ')')?;
        let layers: Vec<&str> = body.split(',').collect();
        if layers.len() != self.num_layers {
            return Err(Error::Genotype(format!("{} layers, expected {}", layers.len(), self.num_layers)));
        }
        let mut g = Vec::with_capacity(2 * layers.len());
        for (k, layer) in layers.iter().enumerate() {
            let (w, a) = layer
                .split_once('-')
                .ok_or_else(|| Error::Genotype(format!("layer {}: {layer:?} is not width-activation", k + 1)))?;
            let width = parse_usize(w, &format!("layer {}", k + 1))?;
            let wi = self.width_choices.iter().position(|&c| c == width).ok_or_else(|| {
                Error::Genotype(format!(
                    "layer {}: width token \"{w}\" not in {:?}",
                    k + 1,
                    self.width_choices
                ))
            })?;
            let ai = Activation::from_name(a)
                .and_then(|act| self.activation_choices.iter().position(|&c| c == act))
                .ok_or_else(|| Error::Genotype(format!("layer {}: activation token {a:?} not allowed", k + 1)))?;
            g.push(wi);
            g.push(ai);
        }
        Ok(g)
    }
}
