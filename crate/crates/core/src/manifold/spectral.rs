use super::{BoundaryCondition, DiscreteLaplacian, DiscreteManifold, RegionMask, RegionRole};
use crate::error::{invalid, Error, Result};
use crate::linalg::symmetric_eigen;
use nalgebra::DMatrix;
use rand::Rng;

/// Default relative tolerance separating distinct eigenvalues.
pub const DEFAULT_GROUP_RTOL: f64 = 1e-8;

/// One distinct eigenvalue: modes `first..first + multiplicity` share `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenGroup {
    pub first: usize,
    pub multiplicity: usize,
    pub value: f64,
}

impl EigenGroup {
    pub fn modes(&self) -> std::ops::Range<usize> {
        self.first..self.first + self.multiplicity
    }
}

/// Greedy clustering of a sorted list. A new group starts when the relative
/// gap to the running group mean exceeds `rtol`.
pub fn group_distinct(eigenvalues: &[f64], rtol: f64) -> Vec<EigenGroup> {
    let mut groups: Vec<EigenGroup> = Vec::new();
    for (i, &v) in eigenvalues.iter().enumerate() {
        if let Some(g) = groups.last_mut() {
            let gap = (v - g.value).abs();
            if gap <= rtol * v.abs().max(g.value.abs()) || gap <= 1e-13 {
                let m = g.multiplicity as f64;
                g.value = (g.value * m + v) / (m + 1.0);
                g.multiplicity += 1;
                continue;
            }
        }
        groups.push(EigenGroup {
            first: i,
            multiplicity: 1,
            value: v,
        });
    }
    groups
}

/// Ascending eigenpairs of `K φ = λ M φ` with `ΦᵀMΦ = I`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    mass: Vec<f64>,
    dofs: Vec<usize>,
    dof_of_node: Vec<Option<usize>>,
    groups: Vec<EigenGroup>,
    rtol: f64,
    bc: BoundaryCondition,
}

/// Dense symmetric eigensolve on `M^{-1/2} K M^{-1/2}`.
///
/// Keeps the lowest `mode_count` modes, extended so no multiplicity group is
/// split.
pub fn eigendecompose(
    manifold: &DiscreteManifold,
    op: &DiscreteLaplacian,
    mode_count: usize,
) -> Result<SpectralDecomposition> {
    let n = op.dim();
    if mode_count > n {
        return invalid(format!("mode_count {mode_count} exceeds dimension {n}"));
    }
    let (values, eigenvectors) = symmetric_eigen(&op.symmetrized())?;
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let all: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v.abs() <= 1e-12 * scale {
                0.0
            } else {
                v.max(0.0)
            }
        })
        .collect();
    let all_groups = group_distinct(&all, DEFAULT_GROUP_RTOL);
    let keep = all_groups
        .iter()
        .map(|g| g.first + g.multiplicity)
        .find(|&end| end >= mode_count)
        .unwrap_or(0)
        .max(mode_count);

    let inv_sqrt: Vec<f64> = op.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut vectors = DMatrix::zeros(n, keep);
    for col in 0..keep {
        let v = eigenvectors.column(col);
        // Fix the sign so the largest entry is positive.
        let pivot = v.iamax();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, col)] = sign * v[r] * inv_sqrt[r];
        }
    }
    let eigenvalues = all[..keep].to_vec();
    let groups = group_distinct(&eigenvalues, DEFAULT_GROUP_RTOL);
    let mut dof_of_node = vec![None; manifold.node_count()];
    for (d, &node) in manifold.dofs().iter().enumerate() {
        dof_of_node[node] = Some(d);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        vectors,
        mass: op.mass.clone(),
        dofs: manifold.dofs().to_vec(),
        dof_of_node,
        groups,
        rtol: DEFAULT_GROUP_RTOL,
        bc: op.bc,
    })
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvectors as columns over the dofs.
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn mode_count(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn groups(&self) -> &[EigenGroup] {
        &self.groups
    }

    pub fn group(&self, k: usize) -> Result<&EigenGroup> {
        self.groups.get(k).ok_or(Error::GroupOutOfRange {
            index: k,
            count: self.groups.len(),
        })
    }

    pub fn grouping_rtol(&self) -> f64 {
        self.rtol
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn dofs(&self) -> &[usize] {
        &self.dofs
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dof_of(&self, node: usize) -> Option<usize> {
        self.dof_of_node.get(node).copied().flatten()
    }

    /// Value of mode `k` at a manifold node (zero on eliminated boundary nodes).
    pub fn node_value(&self, k: usize, node: usize) -> f64 {
        self.dof_of(node).map_or(0.0, |d| self.vectors[(d, k)])
    }

    /// Mass-weighted coefficients `⟨ξ, φ_k⟩` of a node vector.
    pub fn coefficients(&self, node_vector: &[f64]) -> Vec<f64> {
        (0..self.mode_count())
            .map(|k| {
                self.dofs
                    .iter()
                    .enumerate()
                    .map(|(d, &node)| self.vectors[(d, k)] * self.mass[d] * node_vector[node])
                    .sum()
            })
            .collect()
    }

    /// `max |ΦᵀMΦ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let mut mphi = self.vectors.clone();
        for (r, m) in self.mass.iter().enumerate() {
            mphi.row_mut(r).scale_mut(*m);
        }
        let gram = self.vectors.transpose() * mphi;
        let k = gram.nrows();
        (gram - DMatrix::identity(k, k)).amax()
    }

    /// Full eigenspace projection `P_k = Φ_k Φ_kᵀ M` on the dofs.
    pub fn full_projection(&self, k: usize) -> Result<DMatrix<f64>> {
        let g = *self.group(k)?;
        let phi = self.vectors.columns(g.first, g.multiplicity);
        let mut p = phi * phi.transpose();
        for (c, m) in self.mass.iter().enumerate() {
            p.column_mut(c).scale_mut(*m);
        }
        Ok(p)
    }

    /// Number of modes satisfying `λ (c h)² ≤ 0.5`.
    pub fn trusted_mode_count(&self, manifold: &DiscreteManifold) -> usize {
        let h = manifold.max_physical_spacing();
        self.eigenvalues.iter().take_while(|&&l| l * h * h <= 0.5).count()
    }

    /// Keeps the first `groups` distinct groups.
    pub fn truncated_to_groups(&self, groups: usize) -> Self {
        let groups = groups.min(self.groups.len());
        let keep = self.groups[..groups]
            .last()
            .map_or(0, |g| g.first + g.multiplicity);
        self.truncated(keep)
    }

    fn truncated(&self, keep: usize) -> Self {
        let mut out = self.clone();
        out.eigenvalues.truncate(keep);
        out.vectors = self.vectors.columns(0, keep).into_owned();
        out.groups = group_distinct(&out.eigenvalues, self.rtol);
        out
    }

    /// Keeps the modes with `λ (c h)² ≤ 0.5`, capped by `budget` modes.
    /// Never splits a multiplicity group.
    pub fn trusted(&self, manifold: &DiscreteManifold, budget: Option<usize>) -> Self {
        let mut keep = self.trusted_mode_count(manifold);
        if let Some(b) = budget {
            keep = keep.min(b);
        }
        let keep = self
            .groups
            .iter()
            .map(|g| g.first + g.multiplicity)
            .take_while(|&end| end <= keep)
            .last()
            .unwrap_or(0);
        self.truncated(keep)
    }

    /// Replaces the eigenvectors of `group`'s modes by `vectors` (dofs × m).
    pub(crate) fn with_group_vectors(&self, k: usize, vectors: &DMatrix<f64>) -> Self {
        let g = self.groups[k];
        let mut out = self.clone();
        out.vectors
            .columns_mut(g.first, g.multiplicity)
            .copy_from(vectors);
        out
    }
}

/// `P_{W,k} = (P_k ∘ e)|_W` as a `|W| × |W|` matrix on W nodal values.
pub fn restricted_projection(
    decomp: &SpectralDecomposition,
    k: usize,
    w: &RegionMask,
) -> Result<DMatrix<f64>> {
    if w.role() != RegionRole::W || w.is_empty() {
        return invalid("restricted projection needs a nonempty W mask");
    }
    let g = *decomp.group(k)?;
    let rows: Vec<usize> = w
        .nodes()
        .iter()
        .map(|&n| {
            decomp
                .dof_of(n)
                .ok_or_else(|| Error::InvalidInput(format!("node {n} is not a dof")))
        })
        .collect::<Result<_>>()?;
    let nw = rows.len();
    let mut out = DMatrix::zeros(nw, nw);
    for p in g.modes() {
        for (a, &ra) in rows.iter().enumerate() {
            let va = decomp.vectors[(ra, p)];
            for (b, &rb) in rows.iter().enumerate() {
                out[(a, b)] += va * decomp.vectors[(rb, p)] * decomp.mass[rb];
            }
        }
    }
    Ok(out)
}

/// Outward Neumann traces of every retained mode, one row per boundary node,
/// from the one-sided three-point stencil.
pub fn neumann_traces(
    decomp: &SpectralDecomposition,
    manifold: &DiscreteManifold,
) -> Result<DMatrix<f64>> {
    if manifold.is_closed() || decomp.bc() != BoundaryCondition::Dirichlet {
        return invalid("Neumann traces need a manifold with boundary and a Dirichlet decomposition");
    }
    let stencil = trace_stencil(manifold);
    let bnodes = manifold.boundary_nodes();
    let mut out = DMatrix::zeros(bnodes.len(), decomp.mode_count());
    for (b, st) in stencil.iter().enumerate() {
        for k in 0..decomp.mode_count() {
            out[(b, k)] = st.iter().map(|&(d, w)| w * decomp.vectors[(d, k)]).sum();
        }
    }
    Ok(out)
}

/// Trace operator rows: `(dof, weight)` pairs per boundary node such that
/// `∂_ν u(b) = Σ weight · u(dof)` for `u` vanishing on the boundary.
pub(crate) fn trace_stencil(manifold: &DiscreteManifold) -> Vec<[(usize, f64); 2]> {
    manifold
        .boundary_nodes()
        .iter()
        .map(|b| {
            let c = manifold.conformal()[b.node];
            let scale = 1.0 / (2.0 * b.normal_spacing * c);
            let d1 = manifold.dof_of(b.inward[0]).expect("inward node is a dof");
            let d2 = manifold.dof_of(b.inward[1]).expect("inward node is a dof");
            [(d1, -4.0 * scale), (d2, scale)]
        })
        .collect()
}

/// `Φ_k(x, y) = Σ_p φ_p(x) φ_p(y)` on `S_out × S_in`, with `traces` from
/// [`neumann_traces`].
pub fn phi_kernel(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    traces: &DMatrix<f64>,
    k: usize,
    s_out: &RegionMask,
    s_in: &RegionMask,
) -> Result<DMatrix<f64>> {
    let g = *decomp.group(k)?;
    let pos = |mask: &RegionMask| -> Result<Vec<usize>> {
        mask.nodes()
            .iter()
            .map(|&n| {
                manifold
                    .boundary_position(n)
                    .ok_or_else(|| Error::InvalidInput(format!("node {n} is not on the boundary")))
            })
            .collect()
    };
    let (rows, cols) = (pos(s_out)?, pos(s_in)?);
    let mut out = DMatrix::zeros(rows.len(), cols.len());
    for p in g.modes() {
        for (a, &x) in rows.iter().enumerate() {
            for (b, &y) in cols.iter().enumerate() {
                out[(a, b)] += traces[(x, p)] * traces[(y, p)];
            }
        }
    }
    Ok(out)
}

/// Applies an independent random orthogonal matrix to the eigenvectors of
/// every multiplicity group. Eigenspaces and projections are unchanged.
pub fn recombine_within_groups<R: Rng>(decomp: &SpectralDecomposition, rng: &mut R) -> SpectralDecomposition {
    let mut out = decomp.clone();
    for k in 0..decomp.groups.len() {
        let g = decomp.groups[k];
        if g.multiplicity < 2 {
            continue;
        }
        let m = g.multiplicity;
        let raw = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let q = raw.qr().q();
        let mixed = decomp.vectors.columns(g.first, m) * q;
        out = out.with_group_vectors(k, &mixed);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{build_manifold, ManifoldSpec};
    use std::f64::consts::PI;

    #[test]
    fn grouping_examples() {
        let g = group_distinct(&[1.0, 1.0 + 1e-12, 4.0], 1e-9);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].multiplicity, g[1].multiplicity), (2, 1));
        assert!((g[0].value - 1.0).abs() < 1e-11);
        let g = group_distinct(&[0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0], 1e-8);
        let m: Vec<usize> = g.iter().map(|g| g.multiplicity).collect();
        assert_eq!(m, vec![1, 2, 2, 2]);
        assert!(group_distinct(&[], 1e-8).is_empty());
    }

    #[test]
    fn ring_of_four_closed_form() {
        let (m, op) = build_manifold(&ManifoldSpec::circle(4)).unwrap();
        let d = eigendecompose(&m, &op, 4).unwrap();
        let h = PI / 2.0;
        let expect = [0.0, 2.0 / (h * h), 2.0 / (h * h), 4.0 / (h * h)];
        for (a, b) in d.eigenvalues().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(d.orthonormality_error() < 1e-10);
        // constant zero mode
        let c0 = d.vectors()[(0, 0)];
        assert!((0..4).all(|r| (d.vectors()[(r, 0)] - c0).abs() < 1e-12));
    }

    #[test]
    fn three_interior_nodes() {
        let (m, op) = build_manifold(&ManifoldSpec::interval(4, 4.0)).unwrap();
        let d = eigendecompose(&m, &op, 3).unwrap();
        let s = 2f64.sqrt();
        for (a, b) in d.eigenvalues().iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_count_does_not_split_groups() {
        let (m, op) = build_manifold(&ManifoldSpec::circle(16)).unwrap();
        let d = eigendecompose(&m, &op, 2).unwrap();
        assert_eq!(d.mode_count(), 3);
        assert!(eigendecompose(&m, &op, 17).is_err());
    }

    #[test]
    fn projection_out_of_range() {
        let (m, op) = build_manifold(&ManifoldSpec::circle(8)).unwrap();
        let d = eigendecompose(&m, &op, 8).unwrap();
        let w = RegionMask::everything(&m);
        assert!(matches!(
            restricted_projection(&d, 99, &w),
            Err(Error::GroupOutOfRange { .. })
        ));
    }

    #[test]
    fn traces_rejected_on_closed() {
        let (m, op) = build_manifold(&ManifoldSpec::circle(8)).unwrap();
        let d = eigendecompose(&m, &op, 8).unwrap();
        assert!(neumann_traces(&d, &m).is_err());
    }
}
