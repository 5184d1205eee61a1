//! Damped modal kernels and the two forward measurement maps.

mod convolve;
pub mod kernels;
mod signal;

pub use kernels::{
    boundary_kernel, kernel_laplace, kernel_terms, roots, source_kernel, source_kernel_derivative,
    unit_value_solution, ExpTerm, KernelKind, Regime, RootPair,
};
pub use signal::{ChannelRole, TimeGrid, TimeSignal};

pub(crate) use convolve::{continue_states, Convolver, TermState};

use crate::error::{invalid, Result};
use crate::manifold::{
    check_overlap, neumann_traces, BoundaryCondition, DiscreteManifold, RegionMask, RegionRole,
    SpectralDecomposition,
};
use crate::probe::Bump;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    /// Interior source on a closed manifold.
    Interior,
    /// Dirichlet datum on the boundary.
    Boundary,
}

/// Separable source `a(t) ξ(x)`; `spatial` is a node vector over the whole manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub temporal: Bump,
    pub spatial: Vec<f64>,
    pub kind: SourceKind,
}

impl SourceSpec {
    pub fn interior(temporal: Bump, spatial: Vec<f64>) -> Self {
        Self {
            temporal,
            spatial,
            kind: SourceKind::Interior,
        }
    }

    pub fn boundary(temporal: Bump, spatial: Vec<f64>) -> Self {
        Self {
            temporal,
            spatial,
            kind: SourceKind::Boundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    /// Largest internal convolution step; output samples are decimated from it.
    pub max_substep: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self { max_substep: 1e-4 }
    }
}

struct FineGrid {
    dt: f64,
    stride: usize,
    len: usize,
}

impl FineGrid {
    fn new(grid: &TimeGrid, opts: &ForwardOptions) -> Self {
        let stride = (grid.dt() / opts.max_substep).ceil().max(1.0) as usize;
        Self {
            dt: grid.dt() / stride as f64,
            stride,
            len: (grid.len() - 1) * stride + 1,
        }
    }

    fn sample(&self, bump: &Bump) -> Vec<f64> {
        (0..self.len).map(|i| bump.value(i as f64 * self.dt)).collect()
    }

    fn decimate(&self, fine: &[f64]) -> Vec<f64> {
        fine.iter().step_by(self.stride).copied().collect()
    }
}

/// True when `Σ m_i ξ_i` vanishes relative to `Σ m_i |ξ_i|`.
pub fn is_zero_mean(mass: &[f64], xi: &[f64]) -> bool {
    let (s, a) = mass
        .iter()
        .zip(xi)
        .fold((0.0, 0.0), |(s, a), (m, x)| (s + m * x, a + m * x.abs()));
    s.abs() <= 1e-10 * a + 1e-300
}

/// Removes the mass-weighted mean of `xi` over the nodes of `w`.
pub fn project_zero_mean(manifold: &DiscreteManifold, w: &RegionMask, xi: &mut [f64]) {
    let mass = manifold.mass();
    let (num, den) = w
        .nodes()
        .iter()
        .fold((0.0, 0.0), |(n, d), &i| (n + mass[i] * xi[i], d + mass[i]));
    for &i in w.nodes() {
        xi[i] -= num / den;
    }
}

fn check_interior(
    decomp: &SpectralDecomposition,
    src: &SourceSpec,
    w: &RegionMask,
    node_mass: &[f64],
) -> Result<()> {
    if decomp.bc() != BoundaryCondition::None {
        return invalid("source-to-solution map needs a closed manifold");
    }
    if src.kind != SourceKind::Interior {
        return invalid("boundary datum passed to the interior source solver");
    }
    if src.spatial.len() != node_mass.len() {
        return invalid("spatial profile length does not match the manifold");
    }
    if let Some(i) = (0..src.spatial.len()).find(|&i| src.spatial[i] != 0.0 && !w.contains(i)) {
        return invalid(format!("source is not supported in W (node {i})"));
    }
    if !is_zero_mean(node_mass, &src.spatial) {
        return invalid("source is not mass-orthogonal to constants");
    }
    Ok(())
}

/// Source-to-solution map `L_W` for a single separable source.
pub fn solve_source(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    src: &SourceSpec,
    grid: &TimeGrid,
    w: &RegionMask,
) -> Result<TimeSignal> {
    solve_source_terms(manifold, decomp, std::slice::from_ref(src), grid, w, &ForwardOptions::default())
}

/// `L_W` for a sum of separable sources (e.g. a packet train).
///
/// Each modal coefficient is `u_k = K_k * f_k` with the exact exponential
/// integrator against the piecewise-linear interpolant of `f_k` on the
/// internal grid.
pub fn solve_source_terms(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    sources: &[SourceSpec],
    grid: &TimeGrid,
    w: &RegionMask,
    opts: &ForwardOptions,
) -> Result<TimeSignal> {
    if w.role() != RegionRole::W {
        return invalid("observation region must be a W mask");
    }
    for src in sources {
        check_interior(decomp, src, w, manifold.mass())?;
    }
    let rows: Vec<usize> = w
        .nodes()
        .iter()
        .map(|&n| decomp.dof_of(n).expect("W nodes are dofs"))
        .collect();
    let fine = FineGrid::new(grid, opts);
    let mut out = DMatrix::zeros(grid.len(), w.len());
    for src in sources {
        let coefs = decomp.coefficients(&src.spatial);
        let forcing = fine.sample(&src.temporal);
        for g in decomp.groups() {
            if g.value <= 0.0 {
                continue;
            }
            let spatial = DVector::from_iterator(
                rows.len(),
                rows.iter().map(|&r| {
                    g.modes()
                        .map(|k| coefs[k] * decomp.vectors()[(r, k)])
                        .sum::<f64>()
                }),
            );
            if spatial.amax() == 0.0 {
                continue;
            }
            let conv = Convolver::new(&kernel_terms(KernelKind::Source, g.value), fine.dt);
            let temporal = DVector::from_vec(fine.decimate(&conv.run(&forcing)));
            out += temporal * spatial.transpose();
        }
    }
    TimeSignal::new(*grid, out, w.nodes().to_vec(), ChannelRole::Interior)
}

/// Dirichlet-to-Neumann map `Λ_S` for a single boundary datum.
pub fn solve_dtn(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    src: &SourceSpec,
    grid: &TimeGrid,
    s_in: &RegionMask,
    s_out: &RegionMask,
) -> Result<TimeSignal> {
    solve_dtn_terms(
        manifold,
        decomp,
        std::slice::from_ref(src),
        grid,
        s_in,
        s_out,
        &ForwardOptions::default(),
    )
}

/// `Λ_S` for a sum of separable boundary data.
///
/// Modal coefficients are `u_k = K_k * b_k` with the boundary kernel and the
/// pairing `b_k = Σ_{S_in} ξ(x) ∂_νφ_k(x) |x|`; the output is the one-sided
/// normal derivative of `Σ u_k φ_k` on `S_out`.
pub fn solve_dtn_terms(
    manifold: &DiscreteManifold,
    decomp: &SpectralDecomposition,
    sources: &[SourceSpec],
    grid: &TimeGrid,
    s_in: &RegionMask,
    s_out: &RegionMask,
    opts: &ForwardOptions,
) -> Result<TimeSignal> {
    if manifold.is_closed() || decomp.bc() != BoundaryCondition::Dirichlet {
        return invalid("Dirichlet-to-Neumann map needs a manifold with boundary");
    }
    if s_in.role() != RegionRole::SIn || s_out.role() != RegionRole::SOut {
        return invalid("expected S_in and S_out masks");
    }
    check_overlap(s_in, s_out)?;
    let traces = neumann_traces(decomp, manifold)?;
    let out_rows: Vec<usize> = s_out
        .nodes()
        .iter()
        .map(|&n| manifold.boundary_position(n).expect("validated mask"))
        .collect();
    let fine = FineGrid::new(grid, opts);
    let mut out = DMatrix::zeros(grid.len(), s_out.len());
    for src in sources {
        if src.kind != SourceKind::Boundary {
            return invalid("interior source passed to the Dirichlet-to-Neumann solver");
        }
        if src.spatial.len() != manifold.node_count() {
            return invalid("spatial profile length does not match the manifold");
        }
        if let Some(i) =
            (0..src.spatial.len()).find(|&i| src.spatial[i] != 0.0 && !s_in.contains(i))
        {
            return invalid(format!("boundary datum is not supported in S_in (node {i})"));
        }
        let pairing = boundary_pairing(manifold, &traces, &src.spatial);
        let forcing = fine.sample(&src.temporal);
        for g in decomp.groups() {
            let spatial = DVector::from_iterator(
                out_rows.len(),
                out_rows.iter().map(|&x| {
                    g.modes()
                        .map(|k| pairing[k] * traces[(x, k)])
                        .sum::<f64>()
                }),
            );
            if spatial.amax() == 0.0 {
                continue;
            }
            let conv = Convolver::new(&kernel_terms(KernelKind::Boundary, g.value), fine.dt);
            let temporal = DVector::from_vec(fine.decimate(&conv.run(&forcing)));
            out += temporal * spatial.transpose();
        }
    }
    TimeSignal::new(*grid, out, s_out.nodes().to_vec(), ChannelRole::BoundaryOut)
}

/// `⟨ξ, ∂_νφ_k⟩_{∂M}` per mode with the discrete boundary measure.
pub fn boundary_pairing(manifold: &DiscreteManifold, traces: &DMatrix<f64>, xi: &[f64]) -> Vec<f64> {
    let bnodes = manifold.boundary_nodes();
    (0..traces.ncols())
        .map(|k| {
            bnodes
                .iter()
                .enumerate()
                .map(|(b, bn)| xi[bn.node] * traces[(b, k)] * bn.measure)
                .sum()
        })
        .collect()
}

/// Response `(K * a)(t)` of a single mode together with its post-source
/// exponential continuation.
#[derive(Debug, Clone)]
pub struct ModalResponse {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    terms: Vec<ExpTerm>,
    states: Vec<TermState>,
    /// Time at which the states were captured (first internal sample after the support).
    pub tail_start: f64,
}

impl ModalResponse {
    /// Free exponential evolution from `tail_start`; exact for `t ≥ tail_start`.
    pub fn continuation(&self, t: f64) -> f64 {
        continue_states(&self.terms, &self.states, t - self.tail_start)
    }
}

pub fn modal_response(
    kind: KernelKind,
    lambda: f64,
    bump: &Bump,
    grid: &TimeGrid,
    opts: &ForwardOptions,
) -> ModalResponse {
    let fine = FineGrid::new(grid, opts);
    let terms = kernel_terms(kind, lambda);
    let conv = Convolver::new(&terms, fine.dt);
    let capture = ((bump.support().1 / fine.dt).ceil() as usize).min(fine.len - 1);
    let (values, states) = conv.run_capture(&fine.sample(bump), Some(capture));
    ModalResponse {
        grid: *grid,
        values: fine.decimate(&values),
        terms,
        states,
        tail_start: capture as f64 * fine.dt,
    }
}
