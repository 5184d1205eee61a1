//! One packet-train measurement carries a whole probe battery: the train is
//! split into per-packet responses, spectral data is assembled from them,
//! and the result is compared with the battery-based recovery.

use dampspec::compare::*;
use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use dampspec::recover::*;

fn main() -> dampspec::Result<()> {
    let (m, op) = build_manifold(&ManifoldSpec::circle(64))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(9));
    let w = RegionMask::arc(&m, 0, 32)?;
    let probes = indicator_basis(&m, &w, 4)?;
    let opts = RecoveryOptions::default();

    let plan = ProbePlan::evenly_spaced(probes.clone(), SourceKind::Interior, 15.0, 0.5, 2.0, 4)?;
    let grid = TimeGrid::covering(0.02, plan.listening_end())?;
    let train = solve_source_terms(&m, &decomp, &plan.sources(), &grid, &w, &ForwardOptions::default())?;
    let packets = split_measurement(&train, &plan, opts.model_order)?;
    for p in &packets {
        println!(
            "packet {}: fit window {:?}, {} exponents, residual {:.1e}",
            p.index,
            p.window,
            p.model.components.len(),
            p.model.residual
        );
    }
    let single = assemble_source_spectral_data(&m, &w, &probes, &Responses::Packets(&packets), &opts)?;

    let bump = make_bump(0.5, 2.5, 4)?;
    let bgrid = TimeGrid::covering(0.02, 60.0)?;
    let signals = probes
        .iter()
        .map(|p| solve_source(&m, &decomp, &SourceSpec::interior(bump, p.clone()), &bgrid, &w))
        .collect::<dampspec::Result<Vec<_>>>()?;
    let battery = assemble_source_spectral_data(
        &m,
        &w,
        &probes,
        &Responses::Battery { signals: &signals, bump: &bump },
        &opts,
    )?;

    let report = compare_spectral_data(&single.data, &battery.data, Tolerances::RECOVERED)?;
    print!("{report}");
    Ok(())
}
