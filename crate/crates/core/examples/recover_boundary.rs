//! Boundary spectral data of the interval [0, π] recovered from its
//! Dirichlet-to-Neumann map, compared with Neumann traces of the exact
//! eigenfunctions.

use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use dampspec::recover::*;
use std::f64::consts::PI;

fn main() -> dampspec::Result<()> {
    let (m, op) = build_manifold(&ManifoldSpec::interval(128, PI))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(6));
    let ends: Vec<usize> = m.boundary_nodes().iter().map(|b| b.node).collect();
    let s_in = RegionMask::boundary(&m, RegionRole::SIn, ends.clone())?;
    let s_out = RegionMask::boundary(&m, RegionRole::SOut, ends)?;
    let probes = nodal_basis(&m, &s_in);
    let bump = make_bump(0.5, 2.5, 4)?;
    let grid = TimeGrid::covering(0.02, 60.0)?;

    let signals = probes
        .iter()
        .map(|p| solve_dtn(&m, &decomp, &SourceSpec::boundary(bump, p.clone()), &grid, &s_in, &s_out))
        .collect::<dampspec::Result<Vec<_>>>()?;
    let responses = Responses::Battery { signals: &signals, bump: &bump };
    let r = assemble_boundary_spectral_data(&m, &s_in, &s_out, &probes, &responses, &RecoveryOptions::default())?;
    let direct = BoundarySpectralData::direct(&m, &decomp, &s_in, &s_out, 6)?;

    for (g, d) in r.data.groups.iter().zip(&direct.groups) {
        println!(
            "λ = {:.8} (direct {:.8})  |Φ - Φ_direct| = {:.1e}  Φ = {:?}",
            g.lambda,
            d.lambda,
            (&g.matrix - &d.matrix).norm(),
            g.matrix.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        );
    }
    Ok(())
}
