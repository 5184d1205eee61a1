use crate::error::{invalid, Error, Result};
use crate::manifold::{
    neumann_traces, phi_kernel, restricted_projection, DiscreteManifold, RegionMask,
    SpectralDecomposition,
};
use crate::linalg::{svd, symmetric_eigen};
use nalgebra::DMatrix;

/// One distinct eigenvalue with its matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGroup {
    pub lambda: f64,
    /// Numerical rank of the matrix; a lower bound on the multiplicity.
    pub multiplicity: usize,
    pub matrix: DMatrix<f64>,
    pub residual: f64,
    pub flagged: bool,
}

/// Eigenvalues paired with restricted eigenspace projections on W channels.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub channels: Vec<usize>,
    /// Mass weights of the W channels.
    pub weights: Vec<f64>,
    pub groups: Vec<SpectralGroup>,
    pub lambda_rtol: f64,
}

/// Eigenvalues paired with Neumann-trace kernels on `S_out × S_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySpectralData {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub groups: Vec<SpectralGroup>,
    pub lambda_rtol: f64,
}

pub(crate) fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let Ok(dec) = svd(m) else { return 0 };
    let sv = dec.s;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-3 * smax).count()
}

/// Probe profiles restricted to the channels, one column per probe.
pub(crate) fn probe_matrix(channels: &[usize], probes: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(channels.len(), probes.len(), |a, j| probes[j][channels[a]])
}

/// `Ξ (ΞᵀMΞ)⁻¹` and `ΞᵀM` for the mass-orthogonal projector onto the probe span.
pub(crate) struct ProbeFrame {
    pub xi: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
    pub xi_t_m: DMatrix<f64>,
}

impl ProbeFrame {
    pub fn new(xi: DMatrix<f64>, weights: &[f64]) -> Result<Self> {
        let mut xi_t_m = xi.transpose();
        for (c, w) in weights.iter().enumerate() {
            xi_t_m.column_mut(c).scale_mut(*w);
        }
        let gram = &xi_t_m * &xi;
        let (values, _) = symmetric_eigen(&gram)?;
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if !(lo > 1e-12 * hi) {
            return Err(Error::SingularProbes(format!(
                "probe Gram matrix has eigenvalue range [{lo:.3e}, {hi:.3e}]"
            )));
        }
        let gram_inv = gram.try_inverse().expect("positive definite");
        Ok(Self {
            xi,
            gram_inv,
            xi_t_m,
        })
    }

    /// Compression `Π P Π` of the operator known through `Y = P Ξ`, with the
    /// core `ΞᵀMY` symmetrized.
    pub fn compress(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let core = &self.xi_t_m * y;
        let core = (&core + core.transpose()) * 0.5;
        &self.xi * &self.gram_inv * core * &self.gram_inv * &self.xi_t_m
    }

    pub fn compress_operator(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        self.compress(&(p * &self.xi))
    }
}

impl SpectralData {
    pub fn empty(w: &RegionMask, manifold: &DiscreteManifold) -> Self {
        Self {
            channels: w.nodes().to_vec(),
            weights: w.nodes().iter().map(|&n| manifold.mass()[n]).collect(),
            groups: Vec::new(),
            lambda_rtol: 0.0,
        }
    }

    /// Spectral data computed directly from an eigendecomposition: the first
    /// `groups` groups with positive eigenvalue. With `probes`, each matrix is
    /// compressed onto the span of the probe profiles restricted to W.
    pub fn direct(
        manifold: &DiscreteManifold,
        decomp: &SpectralDecomposition,
        w: &RegionMask,
        groups: usize,
        probes: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        let mut out = Self::empty(w, manifold);
        out.lambda_rtol = decomp.grouping_rtol();
        let frame = match probes {
            Some(p) => Some(ProbeFrame::new(probe_matrix(&out.channels, p), &out.weights)?),
            None => None,
        };
        for (k, g) in decomp.groups().iter().enumerate() {
            if out.groups.len() == groups {
                break;
            }
            if g.value <= 0.0 {
                continue;
            }
            let mut p = restricted_projection(decomp, k, w)?;
            if let Some(f) = &frame {
                p = f.compress_operator(&p);
            }
            out.groups.push(SpectralGroup {
                lambda: g.value,
                multiplicity: g.multiplicity,
                matrix: p,
                residual: 0.0,
                flagged: false,
            });
        }
        Ok(out)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Largest asymmetry of `M P` relative to its size, over all groups.
    pub fn symmetry_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| {
                let mut mp = g.matrix.clone();
                for (r, w) in self.weights.iter().enumerate() {
                    mp.row_mut(r).scale_mut(*w);
                }
                (&mp - mp.transpose()).amax() / mp.amax().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    /// Renames channels through `perm`, keeping matrix order.
    pub fn relabeled(&self, perm: impl Fn(usize) -> usize) -> Self {
        Self {
            channels: self.channels.iter().map(|&c| perm(c)).collect(),
            ..self.clone()
        }
    }

    /// Keeps the first `groups` groups.
    pub fn truncated(&self, groups: usize) -> Self {
        let mut out = self.clone();
        out.groups.truncate(groups);
        out
    }
}

impl BoundarySpectralData {
    pub fn empty(s_in: &RegionMask, s_out: &RegionMask) -> Self {
        Self {
            rows: s_out.nodes().to_vec(),
            cols: s_in.nodes().to_vec(),
            groups: Vec::new(),
            lambda_rtol: 0.0,
        }
    }

    /// Boundary spectral data from an eigendecomposition and its Neumann traces.
    pub fn direct(
        manifold: &DiscreteManifold,
        decomp: &SpectralDecomposition,
        s_in: &RegionMask,
        s_out: &RegionMask,
        groups: usize,
    ) -> Result<Self> {
        let traces = neumann_traces(decomp, manifold)?;
        let mut out = Self::empty(s_in, s_out);
        out.lambda_rtol = decomp.grouping_rtol();
        for (k, g) in decomp.groups().iter().enumerate().take(groups) {
            let phi = phi_kernel(manifold, decomp, &traces, k, s_out, s_in)?;
            out.groups.push(SpectralGroup {
                lambda: g.value,
                multiplicity: g.multiplicity,
                matrix: phi,
                residual: 0.0,
                flagged: false,
            });
        }
        Ok(out)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.lambda).collect()
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `(row index, column index)` pairs of nodes lying in both patches.
    pub fn overlap(&self) -> Vec<(usize, usize)> {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(r, n)| self.cols.iter().position(|c| c == n).map(|c| (r, c)))
            .collect()
    }

    /// Largest `|Φ(x,y) - Φ(y,x)|` over the overlap, relative to the largest entry.
    pub fn overlap_symmetry_error(&self) -> f64 {
        let ov = self.overlap();
        self.groups
            .iter()
            .map(|g| {
                let mut worst = 0.0f64;
                for &(rx, cx) in &ov {
                    for &(ry, cy) in &ov {
                        worst = worst.max((g.matrix[(rx, cy)] - g.matrix[(ry, cx)]).abs());
                    }
                }
                worst / g.matrix.amax().max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    }

    pub fn truncated(&self, groups: usize) -> Self {
        let mut out = self.clone();
        out.groups.truncate(groups);
        out
    }
}

/// Rejects matrices whose shape disagrees with the channel lists.
pub(crate) fn check_shapes(rows: usize, cols: usize, groups: &[SpectralGroup]) -> Result<()> {
    for g in groups {
        if g.matrix.shape() != (rows, cols) {
            return invalid(format!(
                "group at λ = {} has a {}×{} matrix, expected {rows}×{cols}",
                g.lambda,
                g.matrix.nrows(),
                g.matrix.ncols()
            ));
        }
    }
    Ok(())
}
