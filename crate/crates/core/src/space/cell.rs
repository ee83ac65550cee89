//! Cell-based space: each intermediate node picks two (predecessor, op)
//! edges. Nodes 0 and 1 are the cell inputs; node `i` may read any node
//! `< i`, and both edges may read the same predecessor.
//!
//! Grammar: `cell(<op>@<pred>,<op>@<pred>;…)` with one `;`-separated
//! group per intermediate node.

use super::{parse_usize, strip_wrapper};
use crate::error::{Error, Result};

pub const NUM_INPUT_NODES: usize = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSpace {
    pub num_intermediate_nodes: usize,
    pub ops: Vec<String>,
}

impl CellSpace {
    pub fn new(num_intermediate_nodes: usize, ops: Vec<String>) -> Result<Self> {
        if num_intermediate_nodes == 0 {
            return Err(Error::InvalidArgument("cell space needs at least one intermediate node".into()));
        }
        if ops.is_empty() {
            return Err(Error::InvalidArgument("cell space needs at least one op".into()));
        }
        for (k, op) in ops.iter().enumerate() {
            if op.is_empty() || !op.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::InvalidArgument(format!("op name {op:?} must be [A-Za-z0-9_]+")));
            }
            if ops[..k].contains(op) {
                return Err(Error::InvalidArgument(format!("duplicate op {op:?}")));
            }
        }
        Ok(Self {
            num_intermediate_nodes,
            ops,
        })
    }

    /// `[pred, op, pred, op]` per node; node `i` has `i` predecessors.
    pub fn cardinalities(&self) -> Vec<usize> {
        (0..self.num_intermediate_nodes)
            .flat_map(|n| {
                let node = n + NUM_INPUT_NODES;
                [node, self.ops.len(), node, self.ops.len()]
            })
            .collect()
    }

    pub fn format(&self, g: &[usize]) -> String {
        let nodes: Vec<String> = g
            .chunks(4)
            .map(|c| format!("{}@{},{}@{}", self.ops[c[1]], c[0], self.ops[c[3]], c[2]))
            .collect();
        format!("cell({})", nodes.join(";"))
    }

    pub fn parse(&self, text: &str) -> Result<Vec<usize>> {
        let body = strip_wrapper(text, "cell(", ')')?;
        let nodes: Vec<&str> = body.split(';').collect();
        if nodes.len() != self.num_intermediate_nodes {
            return Err(Error::Genotype(format!(
                "{} node groups, expected {}",
                nodes.len(),
                self.num_intermediate_nodes
            )));
        }
        let mut g = Vec::with_capacity(4 * nodes.len());
        for (n, group) in nodes.iter().enumerate() {
            let node = n + NUM_INPUT_NODES;
            let edges: Vec<&str> = group.split(',').collect();
            if edges.len() != 2 {
                return Err(Error::Genotype(format!("node {node}: expected 2 edges in {group:?}")));
            }
            for edge in edges {
                let (op, pred) = edge
                    .split_once('@')
                    .ok_or_else(|| Error::Genotype(format!("node {node}: edge {edge:?} is not op@pred")))?;
                let op_idx = self
                    .ops
                    .iter()
                    .position(|o| o == op)
                    .ok_or_else(|| Error::Genotype(format!("node {node}: unknown op token {op:?}")))?;
                let pred = parse_usize(pred, &format!("node {node}"))?;
                if pred >= node {
                    return Err(Error::Genotype(format!(
                        "node {node}: predecessor token \"{pred}\" must be < {node}"
                    )));
                }
                g.push(pred);
                g.push(op_idx);
            }
        }
        Ok(g)
    }
}
