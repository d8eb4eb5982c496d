use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::NetworkScene;

/// Global numbering: free node blocks first in node order, then the slope
/// blocks of linear-strain elements in element order. Constrained nodes own
/// no unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    node_block: Vec<Option<usize>>,
    slope_block: Vec<Option<usize>>,
    blocks: usize,
}

impl DofMap {
    pub fn build(scene: &NetworkScene) -> Self {
        let mut constrained = alloc::vec![false; scene.nodes.len()];
        for c in &scene.constraints {
            constrained[c.node] = true;
        }
        let mut blocks = 0;
        let node_block = constrained
            .iter()
            .map(|&fixed| {
                (!fixed).then(|| {
                    blocks += 1;
                    blocks - 1
                })
            })
            .collect();
        let slope_block = scene
            .elements
            .iter()
            .map(|e| {
                e.mode.has_slope().then(|| {
                    blocks += 1;
                    blocks - 1
                })
            })
            .collect();
        Self {
            node_block,
            slope_block,
            blocks,
        }
    }

    /// Number of scalar unknowns.
    pub fn len(&self) -> usize {
        6 * self.blocks
    }

    pub fn is_empty(&self) -> bool {
        self.blocks == 0
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn node_block(&self, node: usize) -> Option<usize> {
        self.node_block[node]
    }

    pub fn slope_block(&self, element: usize) -> Option<usize> {
        self.slope_block[element]
    }

    pub fn node_offset(&self, node: usize) -> Option<usize> {
        self.node_block[node].map(|b| 6 * b)
    }

    pub fn slope_offset(&self, element: usize) -> Option<usize> {
        self.slope_block[element].map(|b| 6 * b)
    }

    /// Human-readable owner of a scalar unknown.
    pub fn describe(&self, dof: usize) -> String {
        let (block, comp) = (dof / 6, dof % 6);
        if let Some(n) = self.node_block.iter().position(|b| *b == Some(block)) {
            return format!("node {n}, component {comp}");
        }
        if let Some(e) = self.slope_block.iter().position(|b| *b == Some(block)) {
            return format!("strain slope of element {e}, component {comp}");
        }
        format!("dof {dof}")
    }
}

/// Unknown count when every node carries a pose, constrained or not, plus
/// six slope entries per linear-strain element.
pub fn unconstrained_dof_count(scene: &NetworkScene) -> usize {
    6 * scene.nodes.len() + 6 * scene.elements.iter().filter(|e| e.mode.has_slope()).count()
}
