//! The source-to-solution map on a circle: a bump-in-time source supported
//! on an arc, observed on the same arc.

use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;

fn main() -> dampspec::Result<()> {
    let (m, op) = build_manifold(&ManifoldSpec::circle(64))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(21));
    let w = RegionMask::arc(&m, 0, 32)?;

    // Sources must have zero mean on W so the constant mode is not excited.
    let profile = indicator_basis(&m, &w, 1)?.remove(0);
    let bump = make_bump(0.5, 2.5, 4)?;
    let grid = TimeGrid::covering(0.05, 20.0)?;
    let u = solve_source(&m, &decomp, &SourceSpec::interior(bump, profile), &grid, &w)?;

    println!("{} samples × {} channels on W", u.grid.len(), u.channel_count());
    println!("# t  u(t, first W node)  u(t, middle W node)");
    for n in (0..grid.len()).step_by(20) {
        println!("{:5.2}  {:+.6e}  {:+.6e}", grid.time(n), u.values[(n, 0)], u.values[(n, 16)]);
    }
    println!("max |u| = {:.4e}", u.max_abs());
    Ok(())
}
