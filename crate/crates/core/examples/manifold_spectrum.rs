//! Eigenvalues of the discrete Laplace–Beltrami operator on a circle and an
//! interval, their multiplicity groups, and the projection onto one
//! eigenspace restricted to an arc.

use dampspec::manifold::*;
use std::f64::consts::PI;

fn main() -> dampspec::Result<()> {
    let (circle, op) = build_manifold(&ManifoldSpec::circle(64))?;
    let all = eigendecompose(&circle, &op, op.dim())?;
    let decomp = all.trusted(&circle, Some(13));
    println!("circle n = 64, {} trusted modes", decomp.mode_count());
    for g in decomp.groups() {
        println!("  λ = {:>12.8}  multiplicity {}", g.value, g.multiplicity);
    }
    println!("  orthonormality error {:.1e}", decomp.orthonormality_error());

    let w = RegionMask::arc(&circle, 0, 32)?;
    let p = restricted_projection(&decomp, 1, &w)?;
    let trace: f64 = (0..p.nrows()).map(|i| p[(i, i)]).sum();
    println!("  P on half the circle for λ ≈ 1: {}×{}, trace {trace:.6}", p.nrows(), p.ncols());

    let (interval, op) = build_manifold(&ManifoldSpec::interval(128, PI))?;
    let decomp = eigendecompose(&interval, &op, 6)?;
    println!("interval [0, π], 128 cells (continuum values k²)");
    for (k, l) in decomp.eigenvalues().iter().enumerate() {
        let exact = ((k + 1) * (k + 1)) as f64;
        println!("  λ = {l:>12.8}  vs {exact:>4}  rel {:.1e}", (l - exact).abs() / exact);
    }
    Ok(())
}
