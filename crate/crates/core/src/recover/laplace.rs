use crate::error::{invalid, Error, Result};
use crate::forward::TimeSignal;
use crate::probe::Bump;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplaceNormalization {
    Raw,
    /// Divided by the transform of the temporal bump.
    DividedByBump,
}

/// Real-axis samples of a channel-wise Laplace transform.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSamples {
    pub points: Vec<f64>,
    /// One row per sample point, one column per channel.
    pub values: DMatrix<f64>,
    pub channels: Vec<usize>,
    pub normalization: LaplaceNormalization,
}

/// Largest tolerated `e^{-sT} max|y|` left off by truncating at the horizon.
pub const TAIL_BOUND: f64 = 1e-12;

/// Log-spaced sample points on `[lo, hi]`.
pub fn log_points(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count.max(2) - 1) as f64).exp())
        .collect()
}

/// Trapezoidal Laplace transform with the first Euler–Maclaurin end correction.
pub fn laplace_transform(
    signal: &TimeSignal,
    s_points: &[f64],
    normalize: Option<&Bump>,
) -> Result<LaplaceSamples> {
    let mut sorted = s_points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.iter().any(|&s| !(s > 0.0 && s.is_finite()))
        || sorted.windows(2).any(|w| w[0] == w[1])
    {
        return invalid("laplace points must be positive and distinct");
    }
    let grid = &signal.grid;
    let horizon = grid.horizon();
    let peak = signal.max_abs();
    for &s in s_points {
        if (-s * horizon).exp() * peak >= TAIL_BOUND {
            return Err(Error::TailBound {
                s,
                horizon,
                required: (peak / TAIL_BOUND).ln() / s,
            });
        }
    }
    let dt = grid.dt();
    let n = grid.len();
    let channels = signal.channel_count();
    let mut values = DMatrix::zeros(s_points.len(), channels);
    for (row, &s) in s_points.iter().enumerate() {
        let weights: Vec<f64> = (0..n).map(|i| (-s * grid.time(i)).exp()).collect();
        for c in 0..channels {
            let y = signal.values.column(c);
            let f = |i: usize| weights[i] * y[i];
            let mut acc = 0.5 * (f(0) + f(n - 1));
            for i in 1..n - 1 {
                acc += f(i);
            }
            let mut integral = acc * dt;
            if n >= 3 {
                let d0 = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dt);
                let d1 = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * dt);
                integral -= dt * dt / 12.0 * (d1 - d0);
            }
            values[(row, c)] = integral;
        }
        if let Some(bump) = normalize {
            let la = bump.laplace(Complex64::new(s, 0.0)).re;
            values.row_mut(row).scale_mut(1.0 / la);
        }
    }
    Ok(LaplaceSamples {
        points: s_points.to_vec(),
        values,
        channels: signal.channels.clone(),
        normalization: if normalize.is_some() {
            LaplaceNormalization::DividedByBump
        } else {
            LaplaceNormalization::Raw
        },
    })
}
