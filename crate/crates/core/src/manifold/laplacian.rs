use super::{DiscreteManifold, ManifoldKind};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    None,
    Dirichlet,
}

/// Row-wise sparse symmetric matrix.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    fn new(n: usize) -> Self {
        Self {
            rows: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        match self.rows[i].iter_mut().find(|(c, _)| *c == j) {
            Some(entry) => entry.1 += v,
            None => self.rows[i].push((j, v)),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |e| e.1)
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut d = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                d[(i, j)] += v;
            }
        }
        d
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(i, row)| {
            row.iter()
                .all(|&(j, v)| (v - self.get(j, i)).abs() <= tol * v.abs().max(1.0))
        })
    }
}

/// Stiffness/mass pair of the discrete Laplace–Beltrami operator on the dofs.
#[derive(Debug, Clone)]
pub struct DiscreteLaplacian {
    pub stiffness: SparseSymmetric,
    /// Diagonal of the lumped mass matrix, per dof.
    pub mass: Vec<f64>,
    pub bc: BoundaryCondition,
}

impl DiscreteLaplacian {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// Dense `M⁻¹ K`, the operator acting on nodal values.
    pub fn mass_normalized(&self) -> DMatrix<f64> {
        let mut k = self.stiffness.to_dense();
        for (i, m) in self.mass.iter().enumerate() {
            k.row_mut(i).scale_mut(1.0 / m);
        }
        k
    }

    /// Dense `M^{-1/2} K M^{-1/2}`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let mut k = self.stiffness.to_dense();
        let s: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        for i in 0..k.nrows() {
            for j in 0..k.ncols() {
                k[(i, j)] *= s[i] * s[j];
            }
        }
        k
    }

    /// Applies `-Δ = M⁻¹K` to a dof vector.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.stiffness.mul_vec(x, out);
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
    }
}

pub(super) fn assemble(m: &DiscreteManifold) -> DiscreteLaplacian {
    let n = m.dofs().len();
    let mut k = SparseSymmetric::new(n);
    let mut edge = |a: usize, b: usize, w: f64| match (m.dof_of(a), m.dof_of(b)) {
        (Some(i), Some(j)) => {
            k.add(i, i, w);
            k.add(j, j, w);
            k.add(i, j, -w);
            k.add(j, i, -w);
        }
        (Some(i), None) => k.add(i, i, w),
        (None, Some(j)) => k.add(j, j, w),
        (None, None) => {}
    };
    let c = m.conformal();
    let [hx, hy] = m.spacing();
    let [nx, ny] = m.cells();
    match m.kind() {
        ManifoldKind::Circle | ManifoldKind::Interval => {
            let count = m.node_count();
            let edges = if m.kind() == ManifoldKind::Circle {
                count
            } else {
                count - 1
            };
            for e in 0..edges {
                let (a, b) = (e, (e + 1) % count);
                let ce = 0.5 * (c[a] + c[b]);
                edge(a, b, 1.0 / (ce * hx));
            }
        }
        ManifoldKind::Torus | ManifoldKind::Rectangle => {
            // In 2D the conformal weight c^{n-2} on edges is 1.
            let periodic = m.kind() == ManifoldKind::Torus;
            let (cx, cy) = if periodic { (nx, ny) } else { (nx + 1, ny + 1) };
            let idx = |i: usize, j: usize| j * cx + i;
            for j in 0..cy {
                for i in 0..cx {
                    if periodic || i + 1 < cx {
                        edge(idx(i, j), idx((i + 1) % cx, j), hy / hx);
                    }
                    if periodic || j + 1 < cy {
                        edge(idx(i, j), idx(i, (j + 1) % cy), hx / hy);
                    }
                }
            }
        }
    }
    let mass = m.dofs().iter().map(|&node| m.mass()[node]).collect();
    DiscreteLaplacian {
        stiffness: k,
        mass,
        bc: if m.is_closed() {
            BoundaryCondition::None
        } else {
            BoundaryCondition::Dirichlet
        },
    }
}
