//! Discrete compact manifolds with a conformal metric `g = c(x)² · flat`.
//!
//! Closed kinds (circle, torus) are periodic grids. Kinds with boundary
//! (interval, rectangle) eliminate the boundary rows and carry homogeneous
//! Dirichlet conditions. The operator is the lumped-mass second-difference
//! Laplacian: mass weights `c^n h^n` per node and stiffness weights
//! `c^{n-2}` on edges, so that `K φ = λ M φ` is a symmetric-definite pencil.

mod laplacian;
mod region;
mod spectral;

pub use laplacian::{BoundaryCondition, DiscreteLaplacian, SparseSymmetric};
pub use region::{check_overlap, RegionMask, RegionRole};
pub use spectral::{
    eigendecompose, group_distinct, neumann_traces, phi_kernel, recombine_within_groups,
    restricted_projection, EigenGroup, SpectralDecomposition, DEFAULT_GROUP_RTOL,
};

use crate::error::{invalid, Result};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    Circle,
    Torus,
    Interval,
    Rectangle,
}

impl ManifoldKind {
    pub fn is_closed(self) -> bool {
        matches!(self, ManifoldKind::Circle | ManifoldKind::Torus)
    }

    pub fn dimension(self) -> usize {
        match self {
            ManifoldKind::Circle | ManifoldKind::Interval => 1,
            ManifoldKind::Torus | ManifoldKind::Rectangle => 2,
        }
    }
}

/// Conformal factor `c(x, y) > 0` sampled at the nodes.
#[derive(Clone)]
pub enum ConformalFactor {
    Constant(f64),
    /// `scale · (1 + amplitude · cos(frequency · x))`.
    Cosine {
        scale: f64,
        amplitude: f64,
        frequency: f64,
    },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl ConformalFactor {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ConformalFactor::Constant(c) => *c,
            ConformalFactor::Cosine {
                scale,
                amplitude,
                frequency,
            } => scale * (1.0 + amplitude * (frequency * x).cos()),
            ConformalFactor::Custom(f) => f(x, y),
        }
    }
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformalFactor::Constant(c) => write!(f, "Constant({c})"),
            ConformalFactor::Cosine {
                scale,
                amplitude,
                frequency,
            } => write!(f, "Cosine({scale}, {amplitude}, {frequency})"),
            ConformalFactor::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Recipe for a discrete manifold. `cells[1]` and `lengths[1]` are ignored in 1D.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub cells: [usize; 2],
    pub lengths: [f64; 2],
    pub conformal: ConformalFactor,
}

impl ManifoldSpec {
    /// Circle of circumference `2π` in parameter coordinates with `n` nodes.
    pub fn circle(n: usize) -> Self {
        Self {
            kind: ManifoldKind::Circle,
            cells: [n, 1],
            lengths: [2.0 * PI, 0.0],
            conformal: ConformalFactor::Constant(1.0),
        }
    }

    pub fn torus(nx: usize, ny: usize) -> Self {
        Self {
            kind: ManifoldKind::Torus,
            cells: [nx, ny],
            lengths: [2.0 * PI, 2.0 * PI],
            conformal: ConformalFactor::Constant(1.0),
        }
    }

    /// Interval `[0, length]` split into `cells` cells (`cells - 1` interior nodes).
    pub fn interval(cells: usize, length: f64) -> Self {
        Self {
            kind: ManifoldKind::Interval,
            cells: [cells, 1],
            lengths: [length, 0.0],
            conformal: ConformalFactor::Constant(1.0),
        }
    }

    pub fn rectangle(nx: usize, ny: usize, lx: f64, ly: f64) -> Self {
        Self {
            kind: ManifoldKind::Rectangle,
            cells: [nx, ny],
            lengths: [lx, ly],
            conformal: ConformalFactor::Constant(1.0),
        }
    }

    pub fn with_conformal(mut self, conformal: ConformalFactor) -> Self {
        self.conformal = conformal;
        self
    }
}

/// A boundary node together with its one-sided normal stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    /// First and second nodes moving inward along the normal.
    pub inward: [usize; 2],
    /// Spacing along the normal.
    pub normal_spacing: f64,
    /// Discrete boundary measure of the node.
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct DiscreteManifold {
    kind: ManifoldKind,
    cells: [usize; 2],
    lengths: [f64; 2],
    spacing: [f64; 2],
    coords: Vec<[f64; 2]>,
    conformal: Vec<f64>,
    on_boundary: Vec<bool>,
    mass: Vec<f64>,
    boundary: Vec<BoundaryNode>,
    dofs: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
}

impl DiscreteManifold {
    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn is_closed(&self) -> bool {
        self.kind.is_closed()
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn conformal(&self) -> &[f64] {
        &self.conformal
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    /// Mass weight (discrete volume element) per node.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn volume(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Boundary nodes carrying a normal derivative. Rectangle corners are
    /// excluded since they have no well-defined normal.
    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_position(&self, node: usize) -> Option<usize> {
        self.boundary.iter().position(|b| b.node == node)
    }

    /// Nodes carrying an unknown of the discrete operator, in dof order.
    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.dof_of_node.get(node).copied().flatten()
    }

    /// Largest physical grid spacing `max c · h`.
    pub fn max_physical_spacing(&self) -> f64 {
        let h = self.spacing[0].max(if self.kind.dimension() == 2 {
            self.spacing[1]
        } else {
            0.0
        });
        let cmax = self.conformal.iter().cloned().fold(0.0, f64::max);
        cmax * h
    }

    /// Nodes of the named boundary side (`left`, `right`, `bottom`, `top`).
    pub fn boundary_side(&self, side: &str) -> Option<Vec<usize>> {
        if self.is_closed() {
            return None;
        }
        let [lx, ly] = self.lengths;
        let tol = 1e-9 * lx.max(ly).max(1.0);
        let pick = |pred: &dyn Fn(&[f64; 2]) -> bool| -> Vec<usize> {
            self.boundary
                .iter()
                .filter(|b| pred(&self.coords[b.node]))
                .map(|b| b.node)
                .collect()
        };
        let nodes = match side {
            "left" => pick(&|c| c[0].abs() < tol),
            "right" => pick(&|c| (c[0] - lx).abs() < tol),
            "bottom" if self.kind == ManifoldKind::Rectangle => pick(&|c| c[1].abs() < tol),
            "top" if self.kind == ManifoldKind::Rectangle => pick(&|c| (c[1] - ly).abs() < tol),
            _ => return None,
        };
        Some(nodes)
    }
}

/// Builds the discrete manifold and its Laplace–Beltrami operator.
pub fn build_manifold(spec: &ManifoldSpec) -> Result<(DiscreteManifold, DiscreteLaplacian)> {
    let dim = spec.kind.dimension();
    for axis in 0..dim {
        if spec.cells[axis] < 4 {
            return invalid(format!(
                "mesh too small: {} cells on axis {axis}, need at least 4",
                spec.cells[axis]
            ));
        }
        if !(spec.lengths[axis] > 0.0 && spec.lengths[axis].is_finite()) {
            return invalid(format!("axis {axis} length must be positive"));
        }
    }
    let manifold = match spec.kind {
        ManifoldKind::Circle => grid_1d(spec, true),
        ManifoldKind::Interval => grid_1d(spec, false),
        ManifoldKind::Torus => grid_2d(spec, true),
        ManifoldKind::Rectangle => grid_2d(spec, false),
    };
    if let Some((i, c)) = manifold
        .conformal
        .iter()
        .enumerate()
        .find(|(_, c)| !(**c > 0.0 && c.is_finite()))
    {
        return invalid(format!("conformal factor must be positive, got {c} at node {i}"));
    }
    let manifold = manifold.finish();
    let op = laplacian::assemble(&manifold);
    Ok((manifold, op))
}

struct Draft {
    kind: ManifoldKind,
    cells: [usize; 2],
    lengths: [f64; 2],
    spacing: [f64; 2],
    coords: Vec<[f64; 2]>,
    conformal: Vec<f64>,
    on_boundary: Vec<bool>,
    corner: Vec<bool>,
}

fn grid_1d(spec: &ManifoldSpec, periodic: bool) -> Draft {
    let n = spec.cells[0];
    let h = spec.lengths[0] / n as f64;
    let count = if periodic { n } else { n + 1 };
    let coords: Vec<[f64; 2]> = (0..count).map(|i| [i as f64 * h, 0.0]).collect();
    let on_boundary = (0..count)
        .map(|i| !periodic && (i == 0 || i == n))
        .collect();
    Draft {
        kind: spec.kind,
        cells: [n, 1],
        lengths: [spec.lengths[0], 0.0],
        spacing: [h, 1.0],
        conformal: coords
            .iter()
            .map(|c| spec.conformal.eval(c[0], c[1]))
            .collect(),
        corner: vec![false; count],
        coords,
        on_boundary,
    }
}

fn grid_2d(spec: &ManifoldSpec, periodic: bool) -> Draft {
    let [nx, ny] = spec.cells;
    let hx = spec.lengths[0] / nx as f64;
    let hy = spec.lengths[1] / ny as f64;
    let (cx, cy) = if periodic { (nx, ny) } else { (nx + 1, ny + 1) };
    let mut coords = Vec::with_capacity(cx * cy);
    let mut on_boundary = Vec::with_capacity(cx * cy);
    let mut corner = Vec::with_capacity(cx * cy);
    for j in 0..cy {
        for i in 0..cx {
            coords.push([i as f64 * hx, j as f64 * hy]);
            let bx = !periodic && (i == 0 || i == nx);
            let by = !periodic && (j == 0 || j == ny);
            on_boundary.push(bx || by);
            corner.push(bx && by);
        }
    }
    Draft {
        kind: spec.kind,
        cells: [nx, ny],
        lengths: spec.lengths,
        spacing: [hx, hy],
        conformal: coords
            .iter()
            .map(|c| spec.conformal.eval(c[0], c[1]))
            .collect(),
        coords,
        on_boundary,
        corner,
    }
}

impl Draft {
    fn finish(self) -> DiscreteManifold {
        let dim = self.kind.dimension();
        let [hx, hy] = self.spacing;
        let [nx, ny] = self.cells;
        let count = self.coords.len();
        let cell_volume = if dim == 1 { hx } else { hx * hy };

        // Trapezoidal weights: boundary nodes own half a cell per bounding side.
        let mass: Vec<f64> = (0..count)
            .map(|i| {
                let c = self.conformal[i];
                let mut share = 1.0;
                if !self.kind.is_closed() {
                    let [x, y] = self.coords[i];
                    let tol = 1e-9 * hx;
                    if x.abs() < tol || (x - self.lengths[0]).abs() < tol {
                        share *= 0.5;
                    }
                    if dim == 2 {
                        let tol = 1e-9 * hy;
                        if y.abs() < tol || (y - self.lengths[1]).abs() < tol {
                            share *= 0.5;
                        }
                    }
                }
                c.powi(dim as i32) * cell_volume * share
            })
            .collect();

        let mut dofs = Vec::new();
        let mut dof_of_node = vec![None; count];
        for i in 0..count {
            if !self.on_boundary[i] {
                dof_of_node[i] = Some(dofs.len());
                dofs.push(i);
            }
        }

        let mut boundary = Vec::new();
        if !self.kind.is_closed() {
            if dim == 1 {
                boundary.push(BoundaryNode {
                    node: 0,
                    inward: [1, 2],
                    normal_spacing: hx,
                    measure: 1.0,
                });
                boundary.push(BoundaryNode {
                    node: nx,
                    inward: [nx - 1, nx - 2],
                    normal_spacing: hx,
                    measure: 1.0,
                });
            } else {
                let idx = |i: usize, j: usize| j * (nx + 1) + i;
                // left, right, bottom, top; corners skipped
                for j in 1..ny {
                    boundary.push(BoundaryNode {
                        node: idx(0, j),
                        inward: [idx(1, j), idx(2, j)],
                        normal_spacing: hx,
                        measure: self.conformal[idx(0, j)] * hy,
                    });
                }
                for j in 1..ny {
                    boundary.push(BoundaryNode {
                        node: idx(nx, j),
                        inward: [idx(nx - 1, j), idx(nx - 2, j)],
                        normal_spacing: hx,
                        measure: self.conformal[idx(nx, j)] * hy,
                    });
                }
                for i in 1..nx {
                    boundary.push(BoundaryNode {
                        node: idx(i, 0),
                        inward: [idx(i, 1), idx(i, 2)],
                        normal_spacing: hy,
                        measure: self.conformal[idx(i, 0)] * hx,
                    });
                }
                for i in 1..nx {
                    boundary.push(BoundaryNode {
                        node: idx(i, ny),
                        inward: [idx(i, ny - 1), idx(i, ny - 2)],
                        normal_spacing: hy,
                        measure: self.conformal[idx(i, ny)] * hx,
                    });
                }
            }
        }
        debug_assert!(boundary.iter().all(|b| !self.corner[b.node]));

        DiscreteManifold {
            kind: self.kind,
            cells: self.cells,
            lengths: self.lengths,
            spacing: self.spacing,
            coords: self.coords,
            conformal: self.conformal,
            on_boundary: self.on_boundary,
            mass,
            boundary,
            dofs,
            dof_of_node,
        }
    }
}
