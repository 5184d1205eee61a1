//! Equality decisions between spectral data sets: a circle against a
//! rotated relabeling of itself, against a metrically scaled circle, and
//! against a truncated copy.

use dampspec::compare::*;
use dampspec::manifold::*;
use dampspec::recover::SpectralData;

fn main() -> dampspec::Result<()> {
    let n = 64;
    let (m, op) = build_manifold(&ManifoldSpec::circle(n))?;
    let decomp = eigendecompose(&m, &op, op.dim())?.trusted(&m, Some(13));
    let w = RegionMask::arc(&m, 0, 32)?;
    let base = SpectralData::direct(&m, &decomp, &w, 6, None)?;

    // The same arc under a labeling rotated by 5 nodes.
    let shift = |i: usize| (i + n - 5) % n;
    let w_rot = w.relabeled(shift);
    let rotated = SpectralData::direct(&m, &decomp, &w_rot, 6, None)?;
    let r = compare_spectral_data(&base, &rotated, Tolerances { lambda_rtol: 1e-8, matrix_atol: 1e-8 })?;
    println!("rotated relabeling: {} (max distance {:.1e})", r.verdict, r.max_distance());

    let scaled_spec = ManifoldSpec::circle(n).with_conformal(ConformalFactor::Constant(1.1));
    let (ms, ops) = build_manifold(&scaled_spec)?;
    let ds = eigendecompose(&ms, &ops, ops.dim())?.trusted(&ms, Some(13));
    let scaled = SpectralData::direct(&ms, &ds, &RegionMask::arc(&ms, 0, 32)?, 6, None)?;
    let r = compare_spectral_data(&base, &scaled, Tolerances::DIRECT)?;
    println!(
        "conformal factor 1.1: {} (leading gap {:.6}, scaling law {:.6})",
        r.verdict,
        r.leading_gap.unwrap_or(f64::NAN),
        1.0 - 1.0 / 1.21
    );

    let r = compare_spectral_data(&base, &base.truncated(3), Tolerances::DIRECT)?;
    println!("truncated copy: {} (exit code {})", r.verdict, r.verdict.exit_code());
    Ok(())
}
