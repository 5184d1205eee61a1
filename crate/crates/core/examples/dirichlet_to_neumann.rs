//! The Dirichlet-to-Neumann map of the interval [0, π]: a bump datum at the
//! left end and the Neumann traces it produces at both ends.

use dampspec::forward::*;
use dampspec::manifold::*;
use dampspec::probe::*;
use std::f64::consts::PI;

fn main() -> dampspec::Result<()> {
    let (m, op) = build_manifold(&ManifoldSpec::interval(128, PI))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(12));
    let ends = [m.boundary_side("left").unwrap(), m.boundary_side("right").unwrap()].concat();
    let s_in = RegionMask::boundary(&m, RegionRole::SIn, vec![ends[0]])?;
    let s_out = RegionMask::boundary(&m, RegionRole::SOut, ends)?;

    let mut datum = vec![0.0; m.node_count()];
    datum[s_in.nodes()[0]] = 1.0;
    let grid = TimeGrid::covering(0.05, 15.0)?;
    let src = SourceSpec::boundary(make_bump(0.5, 2.5, 4)?, datum);
    let trace = solve_dtn(&m, &decomp, &src, &grid, &s_in, &s_out)?;

    println!("# t  Neumann trace at x = 0  at x = π");
    for n in (0..grid.len()).step_by(10) {
        println!("{:5.2}  {:+.6e}  {:+.6e}", grid.time(n), trace.values[(n, 0)], trace.values[(n, 1)]);
    }
    Ok(())
}
