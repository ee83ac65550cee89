//! Stage/block space of inverted-bottleneck blocks.
//!
//! Each stage contributes one depth decision followed by `max_depth`
//! `(expansion, kernel)` slot pairs. Slots past the chosen depth are inert;
//! canonical genotypes hold 0 there.
//!
//! Grammar: `stage1:d<depth>[e<exp>k<kernel>,…];stage2:…`, listing only
//! the active blocks of each stage.

use super::{odometer, parse_usize};
use crate::error::{Error, Result};
use crate::hwcost::profiling::{PrimitiveKey, ProfilingTable};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageLayout {
    pub channels: usize,
    pub stride: usize,
}

pub const DEFAULT_STAGE_CHANNELS: [usize; 5] = [16, 24, 40, 80, 160];
pub const DEFAULT_STAGE_STRIDES: [usize; 5] = [2, 2, 2, 1, 2];
pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_STEM_CHANNELS: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockwiseSpace {
    pub depth_choices: Vec<usize>,
    pub expansion_choices: Vec<usize>,
    pub kernel_choices: Vec<usize>,
    pub stages: Vec<StageLayout>,
    pub input_resolution: usize,
    pub stem_channels: usize,
}

/// Per-block features fed to the cost models.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlockFeature {
    pub cost: f64,
    pub in_shape: [usize; 3],
    pub out_shape: [usize; 3],
    pub kernel: usize,
    pub stride: usize,
}

impl BlockFeature {
    /// `(cost, inC, inH, inW, outC, outH, outW, kernel, stride)`.
    pub fn to_vector(&self) -> [f64; 9] {
        let [ic, ih, iw] = self.in_shape.map(|v| v as f64);
        let [oc, oh, ow] = self.out_shape.map(|v| v as f64);
        [self.cost, ic, ih, iw, oc, oh, ow, self.kernel as f64, self.stride as f64]
    }
}

impl Default for BlockwiseSpace {
    fn default() -> Self {
        Self::with_stages(5)
    }
}

impl BlockwiseSpace {
    /// Default choices with the first `num_stages` default stage layouts.
    pub fn with_stages(num_stages: usize) -> Self {
        let stages = DEFAULT_STAGE_CHANNELS
            .iter()
            .zip(DEFAULT_STAGE_STRIDES)
            .take(num_stages)
            .map(|(&channels, stride)| StageLayout { channels, stride })
            .collect();
        Self {
            depth_choices: vec![2, 3, 4],
            expansion_choices: vec![3, 4, 6],
            kernel_choices: vec![3, 5, 7],
            stages,
            input_resolution: DEFAULT_RESOLUTION,
            stem_channels: DEFAULT_STEM_CHANNELS,
        }
    }

    pub fn validated(self) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("blockwise space: {m}")));
        if self.stages.is_empty() {
            return bad("needs at least one stage");
        }
        if self.depth_choices.is_empty() || self.depth_choices.contains(&0) {
            return bad("depth choices must be non-empty and positive");
        }
        if self.expansion_choices.is_empty() || self.kernel_choices.is_empty() {
            return bad("expansion and kernel choices must be non-empty");
        }
        if self.stages.iter().any(|s| s.channels == 0 || s.stride == 0) {
            return bad("stage channels and strides must be positive");
        }
        if self.input_resolution == 0 || self.stem_channels == 0 {
            return bad("resolution and stem channels must be positive");
        }
        Ok(self)
    }

    pub fn max_depth(&self) -> usize {
        *self.depth_choices.iter().max().unwrap()
    }

    pub fn stage_width(&self) -> usize {
        1 + 2 * self.max_depth()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        let mut stage = vec![self.depth_choices.len()];
        for _ in 0..self.max_depth() {
            stage.push(self.expansion_choices.len());
            stage.push(self.kernel_choices.len());
        }
        stage.repeat(self.stages.len())
    }

    pub fn depths(&self, g: &[usize]) -> Vec<usize> {
        g.chunks(self.stage_width()).map(|c| self.depth_choices[c[0]]).collect()
    }

    pub fn canonicalize(&self, g: &[usize]) -> Vec<usize> {
        let w = self.stage_width();
        let mut out = g.to_vec();
        for chunk in out.chunks_mut(w) {
            let depth = self.depth_choices[chunk[0]];
            chunk[1 + 2 * depth..].iter_mut().for_each(|v| *v = 0);
        }
        out
    }

    pub fn active_positions(&self, g: &[usize]) -> Vec<usize> {
        let w = self.stage_width();
        let mut out = Vec::new();
        for (s, chunk) in g.chunks(w).enumerate() {
            let depth = self.depth_choices[chunk[0]];
            out.extend(s * w..s * w + 1 + 2 * depth);
        }
        out
    }

    /// Distinct programs of a single stage.
    pub fn stage_size(&self) -> u128 {
        let per_block = (self.expansion_choices.len() * self.kernel_choices.len()) as u128;
        self.depth_choices.iter().map(|&d| per_block.saturating_pow(d as u32)).sum()
    }

    pub fn size(&self) -> u128 {
        self.stage_size().saturating_pow(self.stages.len() as u32)
    }

    fn stage_programs(&self) -> Vec<Vec<usize>> {
        let w = self.stage_width();
        let mut out = Vec::new();
        for (di, &depth) in self.depth_choices.iter().enumerate() {
            let cards: Vec<usize> = (0..depth)
                .flat_map(|_| [self.expansion_choices.len(), self.kernel_choices.len()])
                .collect();
            for slots in odometer(&cards) {
                let mut v = vec![0; w];
                v[0] = di;
                v[1..1 + slots.len()].copy_from_slice(&slots);
                out.push(v);
            }
        }
        out
    }

    pub(crate) fn enumerate_canonical(&self) -> Vec<Vec<usize>> {
        let programs = self.stage_programs();
        let mut out: Vec<Vec<usize>> = vec![Vec::new()];
        for _ in &self.stages {
            out = out
                .iter()
                .flat_map(|prefix| {
                    programs.iter().map(move |p| {
                        let mut v = prefix.clone();
                        v.extend_from_slice(p);
                        v
                    })
                })
                .collect();
        }
        out
    }

    pub fn format(&self, g: &[usize]) -> String {
        let w = self.stage_width();
        let stages: Vec<String> = g
            .chunks(w)
            .enumerate()
            .map(|(s, c)| {
                let depth = self.depth_choices[c[0]];
                let blocks: Vec<String> = (0..depth)
                    .map(|b| {
                        format!(
                            "e{}k{}",
                            self.expansion_choices[c[1 + 2 * b]],
                            self.kernel_choices[c[2 + 2 * b]]
                        )
                    })
                    .collect();
                format!("stage{}:d{}[{}]", s + 1, depth, blocks.join(","))
            })
            .collect();
        stages.join(";")
    }

    pub fn parse(&self, text: &str) -> Result<Vec<usize>> {
        let parts: Vec<&str> = text.split(';').collect();
        if parts.len() != self.stages.len() {
            return Err(Error::Genotype(format!("{} stages, expected {}", parts.len(), self.stages.len())));
        }
        let w = self.stage_width();
        let mut g = Vec::with_capacity(w * parts.len());
        for (s, part) in parts.iter().enumerate() {
            let label = format!("stage{}", s + 1);
            let rest = part
                .strip_prefix(&format!("{label}:d"))
                .ok_or_else(|| Error::Genotype(format!("expected `{label}:d…`, got {part:?}")))?;
            let (depth_tok, blocks) = rest
                .split_once('[')
                .and_then(|(d, b)| b.strip_suffix(']').map(|b| (d, b)))
                .ok_or_else(|| Error::Genotype(format!("{label}: expected d<depth>[…]")))?;
            let depth = parse_usize(depth_tok, &label)?;
            let di = self
                .depth_choices
                .iter()
                .position(|&d| d == depth)
                .ok_or_else(|| Error::Genotype(format!("{label}: depth token \"{depth_tok}\" not in {:?}", self.depth_choices)))?;
            let tokens: Vec<&str> = if blocks.is_empty() { Vec::new() } else { blocks.split(',').collect() };
            if tokens.len() != depth {
                return Err(Error::Genotype(format!("{label}: depth {depth} but {} blocks listed", tokens.len())));
            }
            let mut stage = vec![0; w];
            stage[0] = di;
            for (b, tok) in tokens.iter().enumerate() {
                let where_ = format!("{label} block {}", b + 1);
                let (e, k) = tok
                    .strip_prefix('e')
                    .and_then(|t| t.split_once('k'))
                    .ok_or_else(|| Error::Genotype(format!("{where_}: {tok:?} is not e<exp>k<kernel>")))?;
                let ev = parse_usize(e, &where_)?;
                let kv = parse_usize(k, &where_)?;
                stage[1 + 2 * b] = self
                    .expansion_choices
                    .iter()
                    .position(|&c| c == ev)
                    .ok_or_else(|| Error::Genotype(format!("{where_}: expansion token \"{e}\" not allowed")))?;
                stage[2 + 2 * b] = self
                    .kernel_choices
                    .iter()
                    .position(|&c| c == kv)
                    .ok_or_else(|| Error::Genotype(format!("{where_}: kernel token \"{k}\" not allowed")))?;
            }
            g.extend(stage);
        }
        Ok(g)
    }

    /// Input shape `(C, H, W)` and output channels/stride of block `index`
    /// of stage `stage`.
    pub fn block_geometry(&self, stage: usize, index: usize) -> ([usize; 3], usize, usize) {
        let mut channels = self.stem_channels;
        let mut res = self.input_resolution;
        for layout in &self.stages[..stage] {
            channels = layout.channels;
            res = res.div_ceil(layout.stride);
        }
        let layout = self.stages[stage];
        if index == 0 {
            ([channels, res, res], layout.channels, layout.stride)
        } else {
            let r = res.div_ceil(layout.stride);
            ([layout.channels, r, r], layout.channels, 1)
        }
    }

    pub fn primitive_key(&self, stage: usize, index: usize, expansion: usize, kernel: usize) -> PrimitiveKey {
        let (in_shape, out_channels, stride) = self.block_geometry(stage, index);
        PrimitiveKey {
            in_shape,
            out_channels,
            kernel,
            stride,
            expansion,
        }
    }

    /// Primitive keys of the active blocks in execution order.
    pub fn primitive_keys(&self, g: &[usize]) -> Vec<PrimitiveKey> {
        let w = self.stage_width();
        let mut out = Vec::new();
        for (s, c) in g.chunks(w).enumerate() {
            let depth = self.depth_choices[c[0]];
            for b in 0..depth {
                let e = self.expansion_choices[c[1 + 2 * b]];
                let k = self.kernel_choices[c[2 + 2 * b]];
                out.push(self.primitive_key(s, b, e, k));
            }
        }
        out
    }

    /// Every primitive any genotype of this space can contain.
    pub fn reachable_primitives(&self) -> Vec<PrimitiveKey> {
        let mut keys = Vec::new();
        for s in 0..self.stages.len() {
            for b in 0..self.max_depth() {
                for &e in &self.expansion_choices {
                    for &k in &self.kernel_choices {
                        let key = self.primitive_key(s, b, e, k);
                        if !keys.contains(&key) {
                            keys.push(key);
                        }
                    }
                }
            }
        }
        keys
    }

    pub fn block_features(&self, g: &[usize], table: &ProfilingTable) -> Result<Vec<BlockFeature>> {
        self.primitive_keys(g)
            .into_iter()
            .map(|key| {
                let cost = table.cost(&key)?;
                Ok(BlockFeature {
                    cost,
                    in_shape: key.in_shape,
                    out_shape: key.out_shape(),
                    kernel: key.kernel,
                    stride: key.stride,
                })
            })
            .collect()
    }
}
