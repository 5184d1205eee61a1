use super::DiscreteManifold;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionRole {
    /// Interior observation/source region.
    W,
    SIn,
    SOut,
}

/// A validated set of node indices with a role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    role: RegionRole,
    nodes: Vec<usize>,
}

impl RegionMask {
    /// Interior region; nodes must be unknowns of the operator (never boundary nodes).
    pub fn interior(manifold: &DiscreteManifold, nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return invalid("region W is empty");
        }
        for &n in &nodes {
            if n >= manifold.node_count() {
                return invalid(format!("region W: node {n} out of range"));
            }
            if manifold.dof_of(n).is_none() {
                return invalid(format!("region W: node {n} is a boundary node"));
            }
        }
        Ok(Self {
            role: RegionRole::W,
            nodes: dedup(nodes),
        })
    }

    /// Boundary patch for `S_in` or `S_out`; nodes must carry a normal trace.
    pub fn boundary(
        manifold: &DiscreteManifold,
        role: RegionRole,
        nodes: Vec<usize>,
    ) -> Result<Self> {
        if role == RegionRole::W {
            return invalid("boundary region cannot have role W");
        }
        if nodes.is_empty() {
            return invalid(format!("region {role:?} is empty"));
        }
        for &n in &nodes {
            if manifold.boundary_position(n).is_none() {
                return invalid(format!("region {role:?}: node {n} is not a boundary node"));
            }
        }
        Ok(Self {
            role,
            nodes: dedup(nodes),
        })
    }

    /// Contiguous run of `len` nodes starting at `start` (wrapping on closed 1D manifolds).
    pub fn arc(manifold: &DiscreteManifold, start: usize, len: usize) -> Result<Self> {
        let count = manifold.node_count();
        let nodes = (0..len).map(|i| (start + i) % count).collect();
        Self::interior(manifold, nodes)
    }

    /// Every unknown of the operator (`W = M` on closed manifolds).
    pub fn everything(manifold: &DiscreteManifold) -> Self {
        Self {
            role: RegionRole::W,
            nodes: manifold.dofs().to_vec(),
        }
    }

    pub fn role(&self) -> RegionRole {
        self.role
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.contains(&node)
    }

    /// Maps every node through `perm` (used for isometric relabelings).
    pub fn relabeled(&self, perm: impl Fn(usize) -> usize) -> Self {
        Self {
            role: self.role,
            nodes: self.nodes.iter().map(|&n| perm(n)).collect(),
        }
    }
}

/// `S_in ∩ S_out` must be nonempty for Dirichlet-to-Neumann experiments.
pub fn check_overlap(s_in: &RegionMask, s_out: &RegionMask) -> Result<()> {
    if s_in.nodes().iter().any(|n| s_out.contains(*n)) {
        Ok(())
    } else {
        invalid("S_in and S_out do not intersect")
    }
}

fn dedup(mut nodes: Vec<usize>) -> Vec<usize> {
    let mut seen = std::collections::HashSet::new();
    nodes.retain(|n| seen.insert(*n));
    nodes
}
