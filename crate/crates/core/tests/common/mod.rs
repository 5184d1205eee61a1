//! Independent oracles and shared fixtures for the integration tests.
#![allow(dead_code)]

pub mod invariants;

use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use dampspec::recover::*;
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Low-pass projection of a node vector on a uniform ring: keeps the
/// Fourier modes `|j| ≤ max_freq` (the constant, cosines and sines).
pub fn ring_lowpass(f: &[f64], max_freq: usize) -> Vec<f64> {
    let n = f.len();
    let theta = |i: usize| 2.0 * PI * i as f64 / n as f64;
    let mut out = vec![f.iter().sum::<f64>() / n as f64; n];
    for j in 1..=max_freq {
        let (mut a, mut b) = (0.0, 0.0);
        for (i, v) in f.iter().enumerate() {
            a += v * (j as f64 * theta(i)).cos();
            b += v * (j as f64 * theta(i)).sin();
        }
        let scale = 2.0 / n as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o += scale * (a * (j as f64 * theta(i)).cos() + b * (j as f64 * theta(i)).sin());
        }
    }
    out
}

/// Classical RK4 on the nodal damped wave system of a uniform ring,
/// `u'' = -A(u + u') + a(t) f`, with `A` the periodic second difference.
/// Returns samples at every `stride` steps on the observed nodes.
pub fn rk4_ring(
    n: usize,
    forcing: &[f64],
    bump: &Bump,
    dt: f64,
    steps: usize,
    stride: usize,
    observed: &[usize],
) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    let lap = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * x[i] - x[(i + 1) % n] - x[(i + n - 1) % n]) / (h * h))
            .collect()
    };
    let rhs = |t: f64, u: &[f64], v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let s: Vec<f64> = u.iter().zip(v).map(|(a, b)| a + b).collect();
        let a = bump.value(t);
        let acc = lap(&s)
            .iter()
            .zip(forcing)
            .map(|(l, f)| -l + a * f)
            .collect();
        (v.to_vec(), acc)
    };
    let axpy = |x: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let rows = steps / stride + 1;
    let mut out = DMatrix::zeros(rows, observed.len());
    for step in 0..steps {
        if step % stride == 0 {
            for (c, &o) in observed.iter().enumerate() {
                out[(step / stride, c)] = u[o];
            }
        }
        let t = step as f64 * dt;
        let (k1u, k1v) = rhs(t, &u, &v);
        let (k2u, k2v) = rhs(t + dt / 2.0, &axpy(&u, &k1u, dt / 2.0), &axpy(&v, &k1v, dt / 2.0));
        let (k3u, k3v) = rhs(t + dt / 2.0, &axpy(&u, &k2u, dt / 2.0), &axpy(&v, &k2v, dt / 2.0));
        let (k4u, k4v) = rhs(t + dt, &axpy(&u, &k3u, dt), &axpy(&v, &k3v, dt));
        for i in 0..n {
            u[i] += dt / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
            v[i] += dt / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    if steps.is_multiple_of(stride) {
        for (c, &o) in observed.iter().enumerate() {
            out[(steps / stride, c)] = u[o];
        }
    }
    out
}

/// Trapezoidal (Crank–Nicolson) stepping of the lifted Dirichlet problem on
/// a uniform interval with `cells` cells of length `len`:
/// `M w'' + K(w + w') = F (g + g')` on the interior, where the datum `g`
/// sits at the left end, `F` is the adjoint of the one-sided second-order
/// trace, and the output is that trace of `w` at both ends.
pub fn trapezoid_interval_dtn(
    cells: usize,
    len: f64,
    bump: &Bump,
    dt: f64,
    steps: usize,
    stride: usize,
) -> DMatrix<f64> {
    let n = cells - 1;
    let h = len / cells as f64;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = 2.0 / h;
        if i + 1 < n {
            k[(i, i + 1)] = -1.0 / h;
            k[(i + 1, i)] = -1.0 / h;
        }
    }
    let m = h;
    // Outward normal derivative with the boundary value set to zero.
    let trace = |w: &DVector<f64>| -> (f64, f64) {
        (
            -(4.0 * w[0] - w[1]) / (2.0 * h),
            -(4.0 * w[n - 1] - w[n - 2]) / (2.0 * h),
        )
    };
    let mut f = DVector::zeros(n);
    f[0] = 4.0 / (2.0 * h);
    f[1] = -1.0 / (2.0 * h);
    let r = |t: f64| bump.value(t) + bump.derivative(t);

    let c = dt / 2.0;
    let system = DMatrix::identity(n, n) * m + &k * (c * (1.0 + c));
    let lu = system.lu();
    let mut w = DVector::zeros(n);
    let mut v = DVector::zeros(n);
    let rows = steps / stride + 1;
    let mut out = DMatrix::zeros(rows, 2);
    for step in 0..=steps {
        if step % stride == 0 {
            let (a, b) = trace(&w);
            out[(step / stride, 0)] = a;
            out[(step / stride, 1)] = b;
        }
        if step == steps {
            break;
        }
        let t = step as f64 * dt;
        let rhs = &v * (2.0 * m) + (&k * &w * -2.0 + &f * (r(t) + r(t + dt))) * c;
        let sigma = lu.solve(&rhs).expect("nonsingular trapezoid system");
        let v1 = &sigma - &v;
        w += &sigma * c;
        v = v1;
    }
    out
}

/// Modal solution against the RK4 oracle on a 64-node ring with 21 modes,
/// as a relative max-norm error on the observed arc.
pub fn ring_oracle_error() -> f64 {
    let n = 64;
    let (m, op) = build_manifold(&ManifoldSpec::circle(n)).unwrap();
    let decomp = eigendecompose(&m, &op, 21).unwrap();
    let w = RegionMask::arc(&m, 8, 24).unwrap();
    let profile = indicator_basis(&m, &w, 2).unwrap().remove(1);
    let bump = make_bump(0.5, 2.5, 4).unwrap();
    let grid = TimeGrid::covering(0.02, 20.0).unwrap();
    let modal = solve_source(&m, &decomp, &SourceSpec::interior(bump, profile.clone()), &grid, &w).unwrap();

    let forcing = ring_lowpass(&profile, 10);
    let oracle = rk4_ring(n, &forcing, &bump, 1e-3, 20_000, 20, w.nodes());
    (&modal.values - &oracle).amax() / oracle.amax()
}

/// Dirichlet-to-Neumann output on [0, π] (128 cells, datum at the left end)
/// against the trapezoid oracle, as a relative max-norm error.
pub fn interval_oracle_error() -> f64 {
    let (m, op) = build_manifold(&ManifoldSpec::interval(128, PI)).unwrap();
    let decomp = eigendecompose(&m, &op, op.dim()).unwrap();
    let ends = [m.boundary_side("left").unwrap(), m.boundary_side("right").unwrap()].concat();
    let s_in = RegionMask::boundary(&m, RegionRole::SIn, vec![ends[0]]).unwrap();
    let s_out = RegionMask::boundary(&m, RegionRole::SOut, ends).unwrap();
    let mut datum = vec![0.0; m.node_count()];
    datum[s_in.nodes()[0]] = 1.0;
    let bump = make_bump(0.5, 2.5, 4).unwrap();
    let grid = TimeGrid::covering(0.02, 10.0).unwrap();
    let modal = solve_dtn(&m, &decomp, &SourceSpec::boundary(bump, datum), &grid, &s_in, &s_out).unwrap();

    let oracle = trapezoid_interval_dtn(128, PI, &bump, 2e-4, 50_000, 100);
    (&modal.values - &oracle).amax() / oracle.amax()
}

/// Circle with `n` nodes, `modes` retained, W an arc of `n / 2` nodes and
/// `count` indicator probes, plus the battery responses.
pub struct CircleBattery {
    pub manifold: DiscreteManifold,
    pub decomp: SpectralDecomposition,
    pub w: RegionMask,
    pub probes: Vec<Vec<f64>>,
    pub bump: Bump,
    pub signals: Vec<TimeSignal>,
}

pub fn circle_battery(n: usize, modes: usize, count: usize, conformal: f64) -> CircleBattery {
    let spec = ManifoldSpec::circle(n).with_conformal(ConformalFactor::Constant(conformal));
    let (manifold, op) = build_manifold(&spec).unwrap();
    let decomp = eigendecompose(&manifold, &op, op.dim()).unwrap().trusted(&manifold, Some(modes));
    let w = RegionMask::arc(&manifold, 0, n / 2).unwrap();
    let probes = indicator_basis(&manifold, &w, count).unwrap();
    let bump = make_bump(0.5, 2.5, 4).unwrap();
    let grid = TimeGrid::covering(0.02, 60.0).unwrap();
    let signals = probes
        .iter()
        .map(|p| {
            let src = SourceSpec::interior(bump, p.clone());
            solve_source_terms(&manifold, &decomp, &[src], &grid, &w, &ForwardOptions::default())
                .unwrap()
        })
        .collect();
    CircleBattery {
        manifold,
        decomp,
        w,
        probes,
        bump,
        signals,
    }
}

impl CircleBattery {
    pub fn recover(&self, path: RecoveryPath) -> Recovery<SpectralData> {
        let opts = RecoveryOptions {
            path,
            ..Default::default()
        };
        let responses = Responses::Battery {
            signals: &self.signals,
            bump: &self.bump,
        };
        assemble_source_spectral_data(&self.manifold, &self.w, &self.probes, &responses, &opts)
            .unwrap()
    }

    pub fn direct(&self, groups: usize) -> SpectralData {
        SpectralData::direct(&self.manifold, &self.decomp, &self.w, groups, Some(&self.probes))
            .unwrap()
    }
}

/// Interval of length `len` with 128 cells observed at both ends, and the
/// Dirichlet-to-Neumann responses to unit data at each end.
pub struct IntervalBattery {
    pub manifold: DiscreteManifold,
    pub decomp: SpectralDecomposition,
    pub s_in: RegionMask,
    pub s_out: RegionMask,
    pub probes: Vec<Vec<f64>>,
    pub bump: Bump,
    pub signals: Vec<TimeSignal>,
}

pub fn interval_battery(len: f64, modes: usize) -> IntervalBattery {
    let (manifold, op) = build_manifold(&ManifoldSpec::interval(128, len)).unwrap();
    let decomp = eigendecompose(&manifold, &op, op.dim()).unwrap().trusted(&manifold, Some(modes));
    let ends: Vec<usize> = manifold.boundary_nodes().iter().map(|b| b.node).collect();
    let s_in = RegionMask::boundary(&manifold, RegionRole::SIn, ends.clone()).unwrap();
    let s_out = RegionMask::boundary(&manifold, RegionRole::SOut, ends).unwrap();
    let probes = nodal_basis(&manifold, &s_in);
    let bump = make_bump(0.5, 2.5, 4).unwrap();
    let grid = TimeGrid::covering(0.02, 60.0).unwrap();
    let signals = probes
        .iter()
        .map(|p| {
            let src = SourceSpec::boundary(bump, p.clone());
            solve_dtn(&manifold, &decomp, &src, &grid, &s_in, &s_out).unwrap()
        })
        .collect();
    IntervalBattery {
        manifold,
        decomp,
        s_in,
        s_out,
        probes,
        bump,
        signals,
    }
}

impl IntervalBattery {
    pub fn recover(&self) -> Recovery<BoundarySpectralData> {
        let responses = Responses::Battery {
            signals: &self.signals,
            bump: &self.bump,
        };
        assemble_boundary_spectral_data(
            &self.manifold,
            &self.s_in,
            &self.s_out,
            &self.probes,
            &responses,
            &RecoveryOptions::default(),
        )
        .unwrap()
    }

    pub fn direct(&self, groups: usize) -> BoundarySpectralData {
        BoundarySpectralData::direct(&self.manifold, &self.decomp, &self.s_in, &self.s_out, groups)
            .unwrap()
    }
}

/// Largest relative eigenvalue error and largest matrix distance over the
/// first `count` groups, each matched to the nearest direct group.
pub fn group_errors(
    recovered: &[SpectralGroup],
    direct: &[SpectralGroup],
    count: usize,
) -> (f64, f64) {
    let mut lam = 0.0f64;
    let mut mat = 0.0f64;
    for d in direct.iter().take(count) {
        let g = recovered
            .iter()
            .min_by(|a, b| (a.lambda - d.lambda).abs().total_cmp(&(b.lambda - d.lambda).abs()))
            .expect("recovered data is not empty");
        lam = lam.max((g.lambda - d.lambda).abs() / d.lambda);
        mat = mat.max((&g.matrix - &d.matrix).norm());
    }
    (lam, mat)
}

/// Worst-case errors of the kernel identities over a spread of eigenvalues
/// covering all three damping regimes.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelSuite {
    /// `λ₊ + λ₋ = -λ` and `λ₊λ₋ = λ`, relative to `max(1, λ)`.
    pub roots: f64,
    /// Kernel values at `4 ± 1e-6` against the critical kernel.
    pub continuity: f64,
    /// Initial values and slopes of both kernels.
    pub initial: f64,
    /// Simpson quadrature of the kernels against their Laplace transforms.
    pub laplace: f64,
}

pub const SUITE_LAMBDAS: [f64; 9] = [0.05, 0.3, 1.0, 2.5, 3.9, 4.0, 4.2, 7.0, 30.0];

/// Slope at zero from one small step, using `K'' = -λ(K' + K)` for the
/// quadratic Taylor term.
pub fn slope_at_zero(lambda: f64, k: impl Fn(f64) -> f64) -> f64 {
    let h = 1e-6;
    let k0 = k(0.0);
    (k(h) - k0 + lambda * k0 * h * h / 2.0) / (h - lambda * h * h / 2.0)
}

pub fn kernel_suite() -> KernelSuite {
    let mut out = KernelSuite::default();
    for &lambda in &SUITE_LAMBDAS {
        let r = roots(lambda);
        let scale = lambda.max(1.0);
        out.roots = out
            .roots
            .max((r.plus + r.minus + lambda).norm() / scale)
            .max((r.plus * r.minus - lambda).norm() / scale);

        let src = |t| source_kernel(lambda, t);
        let bnd = |t| boundary_kernel(lambda, t);
        out.initial = out
            .initial
            .max(src(0.0).abs())
            .max((slope_at_zero(lambda, src) - 1.0).abs())
            .max((bnd(0.0) + 1.0).abs())
            .max((slope_at_zero(lambda, bnd) - (lambda - 1.0)).abs());

        for s in [0.5, 1.0, 2.0] {
            let horizon = 40.0 / (s + lambda.min(2.0) / 2.0).min(s + 1.0);
            let panels = 200_000;
            let ls = simpson(0.0, horizon, panels, |t| (-s * t).exp() * src(t));
            let lb = simpson(0.0, horizon, panels, |t| (-s * t).exp() * bnd(t));
            out.laplace = out
                .laplace
                .max((ls - kernel_laplace(KernelKind::Source, lambda, s)).abs())
                .max((lb - kernel_laplace(KernelKind::Boundary, lambda, s)).abs());
        }
    }
    for delta in [-1e-6, 1e-6] {
        for i in 0..=400 {
            let t = i as f64 * 0.05;
            let l = 4.0 + delta;
            out.continuity = out
                .continuity
                .max((source_kernel(l, t) - source_kernel(4.0, t)).abs())
                .max((boundary_kernel(l, t) - boundary_kernel(4.0, t)).abs());
        }
    }
    out
}
