//! Invariant checks shared by the unit-style integration tests and the
//! acceptance run. Each returns a one-line summary or the violated bound.

use dampspec::compare::*;
use dampspec::forward::kernels::roots;
use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use dampspec::recover::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;
pub type NamedCheck = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn run_prop<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> std::result::Result<(), TestCaseError>,
) -> std::result::Result<(), String> {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
    .run(&strategy, test)
    .map_err(|e| e.to_string())
}

/// Roots of distinct eigenvalues never coincide, and the fast root grows.
pub fn poles_disjoint_and_monotone() -> Check {
    run_prop(256, (1e-2f64..100.0, 1e-2f64..100.0), |(a, b)| {
        prop_assume!((a - b).abs() > 1e-6 * a.max(b));
        let (ra, rb) = (roots(a), roots(b));
        for x in [ra.plus, ra.minus] {
            for y in [rb.plus, rb.minus] {
                prop_assert!((x - y).norm() > 0.0);
            }
        }
        let (lo, hi) = if a < b { (ra, rb) } else { (rb, ra) };
        prop_assert!(hi.minus.norm() > lo.minus.norm());
        Ok(())
    })?;
    Ok("256 eigenvalue pairs".into())
}

/// On the full circle the restricted projections are complementary
/// orthogonal projectors.
pub fn projections_idempotent_and_complete() -> Check {
    let n = 32;
    let (m, op) = build_manifold(&ManifoldSpec::circle(n)).map_err(|e| e.to_string())?;
    let decomp = eigendecompose(&m, &op, op.dim()).map_err(|e| e.to_string())?;
    let all = RegionMask::everything(&m);
    let ps: Vec<DMatrix<f64>> = (0..decomp.groups().len())
        .map(|k| restricted_projection(&decomp, k, &all).unwrap())
        .collect();
    let mut idem = 0.0f64;
    let mut cross = 0.0f64;
    for (k, p) in ps.iter().enumerate() {
        idem = idem.max((p * p - p).amax());
        for q in &ps[k + 1..] {
            cross = cross.max((p * q).amax());
        }
    }
    let sum = ps.iter().fold(DMatrix::zeros(n, n), |acc, p| acc + p);
    let complete = (sum - DMatrix::identity(n, n)).amax();
    ensure!(idem < 1e-10, "P² - P reaches {idem:.1e}");
    ensure!(cross < 1e-10, "P_j P_k reaches {cross:.1e}");
    ensure!(complete < 1e-10, "ΣP - I reaches {complete:.1e}");
    Ok(format!(
        "{} groups, idempotence {idem:.1e}, orthogonality {cross:.1e}, completeness {complete:.1e}",
        ps.len()
    ))
}

/// Restricted projections on the circle and Neumann-trace kernels on a
/// square do not depend on the basis chosen inside each eigenspace.
pub fn eigenspace_data_is_basis_invariant() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (m, op) = build_manifold(&ManifoldSpec::circle(40)).map_err(|e| e.to_string())?;
    let decomp = eigendecompose(&m, &op, op.dim()).map_err(|e| e.to_string())?;
    let w = RegionMask::arc(&m, 3, 17).map_err(|e| e.to_string())?;
    let mixed = recombine_within_groups(&decomp, &mut rng);
    let mut p_err = 0.0f64;
    for k in 0..decomp.groups().len() {
        let a = restricted_projection(&decomp, k, &w).unwrap();
        let b = restricted_projection(&mixed, k, &w).unwrap();
        p_err = p_err.max((a - b).amax());
    }

    let spec = ManifoldSpec::rectangle(12, 12, 1.0, 1.0);
    let (m, op) = build_manifold(&spec).map_err(|e| e.to_string())?;
    let decomp = eigendecompose(&m, &op, 30).map_err(|e| e.to_string())?;
    let ensure_degenerate = decomp.groups().iter().any(|g| g.multiplicity > 1);
    ensure!(ensure_degenerate, "square has no repeated eigenvalue");
    let mixed = recombine_within_groups(&decomp, &mut rng);
    let nodes: Vec<usize> = m.boundary_nodes().iter().map(|b| b.node).collect();
    let s_out = RegionMask::boundary(&m, RegionRole::SOut, nodes[..10].to_vec()).unwrap();
    let s_in = RegionMask::boundary(&m, RegionRole::SIn, nodes[5..20].to_vec()).unwrap();
    let (ta, tb) = (
        neumann_traces(&decomp, &m).unwrap(),
        neumann_traces(&mixed, &m).unwrap(),
    );
    let mut phi_err = 0.0f64;
    let mut scale = 0.0f64;
    for k in 0..decomp.groups().len() {
        let a = phi_kernel(&m, &decomp, &ta, k, &s_out, &s_in).unwrap();
        let b = phi_kernel(&m, &mixed, &tb, k, &s_out, &s_in).unwrap();
        scale = scale.max(a.amax());
        phi_err = phi_err.max((a - b).amax());
    }
    ensure!(p_err < 1e-12, "projection changed by {p_err:.1e}");
    ensure!(phi_err < 1e-10 * scale, "Φ changed by {phi_err:.1e}");
    Ok(format!("projection {p_err:.1e}, Φ {:.1e} relative", phi_err / scale))
}

/// Laplace data divided by the bump transform does not depend on the bump.
pub fn normalized_laplace_is_bump_independent() -> Check {
    let (m, op) = build_manifold(&ManifoldSpec::circle(48)).map_err(|e| e.to_string())?;
    let decomp = eigendecompose(&m, &op, op.dim()).unwrap().trusted(&m, Some(11));
    let w = RegionMask::arc(&m, 0, 24).unwrap();
    let profile = indicator_basis(&m, &w, 3).unwrap()[1].clone();
    let grid = TimeGrid::covering(0.01, 70.0).unwrap();
    let points = log_points(0.5, 8.0, 12);
    let transform = |bump: Bump| {
        let y = solve_source(&m, &decomp, &SourceSpec::interior(bump, profile.clone()), &grid, &w)
            .unwrap();
        laplace_transform(&y, &points, Some(&bump)).unwrap().values
    };
    let a = transform(make_bump(0.5, 2.5, 4).unwrap());
    let b = transform(make_bump(1.0, 1.8, 6).unwrap());
    let err = (&a - &b).amax() / a.amax();

    // Closed form: Σ_k (P_{W,k} ψ) / (s² + λ_k s + λ_k).
    let psi = DMatrix::from_fn(w.len(), 1, |i, _| profile[w.nodes()[i]]);
    let mut expect = DMatrix::zeros(points.len(), w.len());
    for (k, g) in decomp.groups().iter().enumerate() {
        let column = restricted_projection(&decomp, k, &w).unwrap() * &psi;
        for (r, &s) in points.iter().enumerate() {
            let weight = kernel_laplace(KernelKind::Source, g.value, s);
            for c in 0..w.len() {
                expect[(r, c)] += weight * column[c];
            }
        }
    }
    let exact = (&a - &expect).amax() / a.amax();
    ensure!(err < 1e-6, "bump dependence {err:.1e}");
    ensure!(exact < 1e-6, "normalized data off the closed form by {exact:.1e}");
    Ok(format!(
        "relative spread {err:.1e}, closed-form error {exact:.1e} over {} points",
        points.len()
    ))
}

/// Responses vanish before the source switches on, for both maps.
pub fn responses_are_causal() -> Check {
    let (m, op) = build_manifold(&ManifoldSpec::circle(32)).unwrap();
    let decomp = eigendecompose(&m, &op, op.dim()).unwrap().trusted(&m, Some(9));
    let w = RegionMask::arc(&m, 0, 16).unwrap();
    let profile = indicator_basis(&m, &w, 2).unwrap()[0].clone();
    let bump = make_bump(2.0, 3.0, 4).unwrap();
    let grid = TimeGrid::covering(0.05, 8.0).unwrap();
    let onset = grid.index_at_or_after(2.0);
    let y = solve_source(&m, &decomp, &SourceSpec::interior(bump, profile), &grid, &w).unwrap();
    let early = y.values.rows(0, onset + 1).amax();

    let (m, op) = build_manifold(&ManifoldSpec::interval(32, 1.0)).unwrap();
    let decomp = eigendecompose(&m, &op, op.dim()).unwrap().trusted(&m, Some(6));
    let ends: Vec<usize> = m.boundary_nodes().iter().map(|b| b.node).collect();
    let s_in = RegionMask::boundary(&m, RegionRole::SIn, ends.clone()).unwrap();
    let s_out = RegionMask::boundary(&m, RegionRole::SOut, ends).unwrap();
    let datum = nodal_basis(&m, &s_in).remove(0);
    let z = solve_dtn(&m, &decomp, &SourceSpec::boundary(bump, datum), &grid, &s_in, &s_out)
        .unwrap();
    let early_dtn = z.values.rows(0, onset + 1).amax();
    ensure!(early == 0.0 && early_dtn == 0.0, "response before onset");
    ensure!(y.max_abs() > 0.0 && z.max_abs() > 0.0, "no response after onset");
    Ok("both maps silent before onset".into())
}

/// Splitting a packet train recovers each packet's own response, and the
/// packet responses add back up to the measurement.
pub fn splitting_is_consistent() -> Check {
    let (m, op) = build_manifold(&ManifoldSpec::circle(48)).unwrap();
    let decomp = eigendecompose(&m, &op, op.dim()).unwrap().trusted(&m, Some(9));
    let w = RegionMask::arc(&m, 0, 24).unwrap();
    let probes = indicator_basis(&m, &w, 3).unwrap();
    let plan = ProbePlan::evenly_spaced(probes, SourceKind::Interior, 15.0, 0.5, 2.0, 4).unwrap();
    let grid = TimeGrid::covering(0.02, plan.listening_end()).unwrap();
    let opts = ForwardOptions::default();
    let train = solve_source_terms(&m, &decomp, &plan.sources(), &grid, &w, &opts).unwrap();
    let packets = split_measurement(&train, &plan, 16).map_err(|e| e.to_string())?;
    let scale = train.max_abs();
    let mut total = train.values.clone() * 0.0;
    let mut own = 0.0f64;
    for (p, src) in packets.iter().zip(plan.sources()) {
        let r = p.reconstruct().unwrap();
        let alone = solve_source_terms(&m, &decomp, &[src], &grid, &w, &opts).unwrap();
        own = own.max((&r.values - &alone.values).amax() / scale);
        total += r.values;
    }
    let sum = (&total - &train.values).amax() / scale;
    ensure!(own < 1e-4, "packet response off by {own:.1e}");
    ensure!(sum < 1e-4, "packets do not add up, {sum:.1e}");
    Ok(format!("{} packets, per-packet {own:.1e}, sum {sum:.1e}", packets.len()))
}

fn random_data(seed: u64, groups: usize, channels: usize) -> SpectralData {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralData {
        channels: (0..channels).collect(),
        weights: vec![1.0; channels],
        groups: (0..groups)
            .map(|k| {
                let a = DMatrix::from_fn(channels, channels, |_, _| rng.random_range(-1.0..1.0));
                SpectralGroup {
                    lambda: (k as f64 + 1.0) * 2.0 + rng.random_range(-0.5..0.5),
                    multiplicity: 1,
                    matrix: &a + a.transpose(),
                    residual: 0.0,
                    flagged: false,
                }
            })
            .collect(),
        lambda_rtol: 1e-8,
    }
}

fn perturbed(d: &SpectralData, eps: f64, seed: u64) -> SpectralData {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    for g in &mut out.groups {
        g.lambda *= 1.0 + eps * rng.random_range(-1.0..1.0);
        g.matrix.iter_mut().for_each(|x| *x += eps * rng.random_range(-1.0..1.0));
    }
    out
}

/// Reflexivity, symmetry, tolerance monotonicity and order invariance of
/// the comparison.
pub fn comparison_is_well_behaved() -> Check {
    run_prop(
        128,
        (any::<u64>(), 1usize..6, 1usize..5, -9.0f64..-1.0, any::<u64>()),
        |(seed, groups, channels, log_eps, perm_seed)| {
            let a = random_data(seed, groups, channels);
            let b = perturbed(&a, 10f64.powf(log_eps), seed ^ 1);
            let tol = |t: f64| Tolerances {
                lambda_rtol: t,
                matrix_atol: t,
            };
            prop_assert_eq!(compare_spectral_data(&a, &a, tol(1e-12)).unwrap().verdict, Verdict::Equal);
            let ab = compare_spectral_data(&a, &b, tol(1e-4)).unwrap();
            let ba = compare_spectral_data(&b, &a, tol(1e-4)).unwrap();
            prop_assert_eq!(ab.verdict, ba.verdict);

            let verdicts: Vec<Verdict> = [1e-10, 1e-7, 1e-4, 1e-1]
                .iter()
                .map(|&t| compare_spectral_data(&a, &b, tol(t)).unwrap().verdict)
                .collect();
            if let Some(first_equal) = verdicts.iter().position(|v| *v == Verdict::Equal) {
                prop_assert!(verdicts[first_equal..].iter().all(|v| *v == Verdict::Equal));
            }

            let mut shuffled = b.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(perm_seed);
            use rand::seq::SliceRandom;
            shuffled.groups.shuffle(&mut rng);
            let shuffled = compare_spectral_data(&a, &shuffled, tol(1e-4)).unwrap();
            prop_assert_eq!(shuffled.verdict, ab.verdict);
            Ok(())
        },
    )?;
    Ok("128 random data pairs".into())
}

/// Circle eigenvalues follow the closed form and scale as `1/c²` under a
/// constant conformal factor `c`.
pub fn circle_spectrum_closed_form() -> Check {
    let n = 40;
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut worst = 0.0f64;
    for c in [1.0, 1.3] {
        let spec = ManifoldSpec::circle(n).with_conformal(ConformalFactor::Constant(c));
        let (m, op) = build_manifold(&spec).unwrap();
        let decomp = eigendecompose(&m, &op, op.dim()).unwrap();
        let mut expect: Vec<f64> = (0..n)
            .map(|j| {
                let s = (std::f64::consts::PI * j as f64 / n as f64).sin();
                4.0 * s * s / (h * h * c * c)
            })
            .collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in decomp.eigenvalues().iter().zip(&expect) {
            worst = worst.max((a - b).abs() / b.max(1.0));
        }
    }
    ensure!(worst < 1e-10, "eigenvalues off by {worst:.1e}");
    Ok(format!("relative error {worst:.1e}"))
}

/// Every check, by name.
pub fn all() -> Vec<NamedCheck> {
    vec![
        ("pole disjointness and monotonicity", poles_disjoint_and_monotone),
        ("projection idempotence and completeness", projections_idempotent_and_complete),
        ("eigenspace basis invariance", eigenspace_data_is_basis_invariant),
        ("bump independence of normalized Laplace data", normalized_laplace_is_bump_independent),
        ("causality", responses_are_causal),
        ("splitting consistency", splitting_is_consistent),
        ("comparison properties", comparison_is_well_behaved),
        ("circle spectrum", circle_spectrum_closed_form),
    ]
}
