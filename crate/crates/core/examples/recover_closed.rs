//! Spectral data of a circle recovered from a probe battery, through both
//! the time-domain pencil path and the Laplace-domain rational path, and
//! checked against a direct eigensolve.

use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use dampspec::recover::*;

fn main() -> dampspec::Result<()> {
    let (m, op) = build_manifold(&ManifoldSpec::circle(64))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(9));
    let w = RegionMask::arc(&m, 0, 32)?;
    let probes = indicator_basis(&m, &w, 4)?;
    let bump = make_bump(0.5, 2.5, 4)?;
    let grid = TimeGrid::covering(0.02, 60.0)?;

    let signals = probes
        .iter()
        .map(|p| solve_source(&m, &decomp, &SourceSpec::interior(bump, p.clone()), &grid, &w))
        .collect::<dampspec::Result<Vec<_>>>()?;
    let direct = SpectralData::direct(&m, &decomp, &w, 4, Some(&probes))?;

    for path in [RecoveryPath::Pencil, RecoveryPath::Rational] {
        let opts = RecoveryOptions { path, ..Default::default() };
        let responses = Responses::Battery { signals: &signals, bump: &bump };
        let r = assemble_source_spectral_data(&m, &w, &probes, &responses, &opts)?;
        println!("{path:?}: {} groups", r.data.len());
        for (g, d) in r.data.groups.iter().zip(&direct.groups) {
            println!(
                "  λ = {:.8} (direct {:.8})  rel {:.1e}  |P - P_direct| = {:.1e}  rank {}",
                g.lambda,
                d.lambda,
                (g.lambda - d.lambda).abs() / d.lambda,
                (&g.matrix - &d.matrix).norm(),
                g.multiplicity
            );
        }
    }
    Ok(())
}
