//! Multi-channel matrix pencil fit of exponential sums.

use super::model::{ExpComponent, ExponentialModel};
use crate::error::{invalid, Error, Result};
use crate::forward::TimeSignal;
use crate::linalg::{eigenvalues, svd};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PencilOptions {
    /// Singular values below this fraction of the largest are discarded.
    pub rank_rtol: f64,
    /// The window is decimated to at most this many samples for the pencil.
    pub max_samples: usize,
    /// Exponents closer than this merge into a double exponent.
    pub merge_tol: f64,
    pub residual_threshold: f64,
    pub max_condition: f64,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self {
            rank_rtol: 1e-8,
            max_samples: 600,
            merge_tol: 1e-3,
            residual_threshold: 1e-6,
            max_condition: 1e12,
        }
    }
}

/// Window `[from, to]` as sample indices (inclusive).
pub(crate) fn window_indices(signal: &TimeSignal, window: (f64, f64)) -> (usize, usize) {
    let grid = &signal.grid;
    let i0 = grid.index_at_or_after(window.0);
    let last = ((window.1 / grid.dt()) + 1e-9).floor();
    let i1 = if last < 0.0 { 0 } else { (last as usize).min(grid.len() - 1) };
    (i0, i1)
}

pub fn matrix_pencil(
    signal: &TimeSignal,
    window: (f64, f64),
    model_order: usize,
) -> Result<ExponentialModel> {
    matrix_pencil_with(signal, window, model_order, &PencilOptions::default())
}

pub fn matrix_pencil_with(
    signal: &TimeSignal,
    window: (f64, f64),
    model_order: usize,
    opts: &PencilOptions,
) -> Result<ExponentialModel> {
    if model_order == 0 {
        return invalid("model order must be positive");
    }
    let (i0, i1) = window_indices(signal, window);
    let n = if i1 >= i0 { i1 - i0 + 1 } else { 0 };
    if n < 2 * model_order {
        return invalid(format!(
            "fit window holds {n} samples, model order {model_order} needs at least {}",
            2 * model_order
        ));
    }
    let dt = signal.grid.dt();
    let t_ref = signal.grid.time(i0);
    let data = signal.values.rows(i0, n).into_owned();
    let scale = data.amax();
    if scale == 0.0 {
        return Ok(ExponentialModel::zero(signal.channels.clone(), t_ref));
    }

    // drop the part of the window that is numerically zero
    let last_significant = (0..n)
        .rev()
        .find(|&r| data.row(r).amax() > 1e-13 * scale)
        .unwrap_or(0);
    let nt = (last_significant + 1).max((4 * model_order).min(n));
    let data = data.rows(0, nt).into_owned();

    let stride = nt.div_ceil(opts.max_samples).max(1);
    let ns = nt.div_ceil(stride);
    let coarse = DMatrix::from_fn(ns, data.ncols(), |i, c| data[(i * stride, c)]);
    let coarse = compress_channels(&coarse, model_order)?;
    let dt_eff = dt * stride as f64;

    let (rates, condition) = pencil_rates(&coarse, model_order, dt_eff, opts)?;
    let rates = merge_rates(rates, opts.merge_tol);
    let (components, amp_condition, residual) = fit_amplitudes(&data, dt, &rates)?;
    let condition = condition.max(amp_condition);
    if condition > opts.max_condition {
        return Err(Error::IllConditioned { condition });
    }
    let residual = residual / scale;
    Ok(ExponentialModel {
        t_ref,
        channels: signal.channels.clone(),
        components,
        residual,
        condition,
        flagged: residual > opts.residual_threshold,
    })
}

/// Leading left singular directions of the channel data, scaled.
fn compress_channels(y: &DMatrix<f64>, cap: usize) -> Result<DMatrix<f64>> {
    if y.ncols() <= 1 {
        return Ok(y.clone());
    }
    let f = svd(y)?;
    Ok(f.scaled_left(f.rank(1e-13).min(cap.max(1)).max(1)))
}

fn pencil_rates(
    y: &DMatrix<f64>,
    model_order: usize,
    dt: f64,
    opts: &PencilOptions,
) -> Result<(Vec<Complex64>, f64)> {
    let ns = y.nrows();
    let l = (ns / 3).max(model_order).min(ns - model_order);
    let rows = ns - l;
    let mut h = DMatrix::zeros(rows * y.ncols(), l + 1);
    for c in 0..y.ncols() {
        for i in 0..rows {
            for j in 0..=l {
                h[(c * rows + i, j)] = y[(i + j, c)];
            }
        }
    }
    let f = svd(&h)?;
    let rank = f.rank(opts.rank_rtol).clamp(1, model_order);
    let v = f.v.columns(0, rank).into_owned();
    let v1 = v.rows(0, l).into_owned();
    let v2 = v.rows(1, l).into_owned();
    let v1_svd = svd(&v1)?;
    let (hi, lo) = (v1_svd.max(), v1_svd.s[rank - 1]);
    let condition = hi / lo;
    if !condition.is_finite() || condition > opts.max_condition {
        return Err(Error::IllConditioned { condition });
    }
    let shift = v1_svd.solve(&v2, 0.0);
    let rates = eigenvalues(&shift)?
        .iter()
        .filter(|z| z.norm() > 1e-300)
        .map(|z| z.ln() / dt)
        .collect();
    Ok((rates, condition))
}

/// A distinct rate with the highest power of `τ` it carries.
#[derive(Debug, Clone, Copy)]
struct Rate {
    value: Complex64,
    power: u8,
}

/// Cleans conjugate pairs and merges near-coincident rates into double rates.
fn merge_rates(raw: Vec<Complex64>, tol: f64) -> Vec<Rate> {
    // one representative per conjugate pair, im >= 0
    let mut reps: Vec<Complex64> = Vec::new();
    let mut used = vec![false; raw.len()];
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = raw[i];
        if z.im.abs() <= 1e-12 * z.norm().max(1.0) {
            reps.push(Complex64::new(z.re, 0.0));
            continue;
        }
        let partner = (0..raw.len())
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (raw[a] - z.conj()).norm().total_cmp(&(raw[b] - z.conj()).norm()));
        let avg = match partner {
            Some(j) if (raw[j] - z.conj()).norm() < 1e-6 * z.norm().max(1.0) => {
                used[j] = true;
                (z + raw[j].conj()) / 2.0
            }
            _ => z,
        };
        reps.push(Complex64::new(avg.re, avg.im.abs()));
    }
    // a conjugate pair closer than tol is a double real rate
    let mut rates: Vec<Rate> = Vec::new();
    for z in reps {
        let (value, power) = if z.im > 0.0 && 2.0 * z.im < tol {
            (Complex64::new(z.re, 0.0), 1)
        } else {
            (z, 0)
        };
        rates.push(Rate { value, power });
    }
    rates.sort_by(|a, b| a.value.re.total_cmp(&b.value.re).then(a.value.im.total_cmp(&b.value.im)));
    let mut merged: Vec<(Rate, usize)> = Vec::new();
    for r in rates {
        match merged.last_mut() {
            Some((m, count)) if (m.value - r.value).norm() < tol => {
                let k = *count as f64;
                m.value = (m.value * k + r.value) / (k + 1.0);
                m.power = 1;
                *count += 1;
            }
            _ => merged.push((r, 1)),
        }
    }
    merged.into_iter().map(|(r, _)| r).collect()
}

/// Real least squares for the amplitudes; returns components, basis condition
/// and the absolute max-norm residual.
fn fit_amplitudes(
    y: &DMatrix<f64>,
    dt: f64,
    rates: &[Rate],
) -> Result<(Vec<ExpComponent>, f64, f64)> {
    // (rate, power, imaginary column?)
    let mut cols: Vec<(Complex64, u8, bool)> = Vec::new();
    for r in rates {
        for p in 0..=r.power {
            cols.push((r.value, p, false));
            if r.value.im > 0.0 {
                cols.push((r.value, p, true));
            }
        }
    }
    if cols.is_empty() {
        return Ok((Vec::new(), 1.0, y.amax()));
    }
    let n = y.nrows();
    let mut b = DMatrix::from_fn(n, cols.len(), |i, j| {
        let tau = i as f64 * dt;
        let (rate, p, imag) = cols[j];
        let e = (rate * tau).exp() * tau.powi(p as i32);
        if imag {
            e.im
        } else {
            e.re
        }
    });
    let norms: Vec<f64> = b.column_iter().map(|c| c.norm().max(1e-300)).collect();
    for (j, s) in norms.iter().enumerate() {
        b.column_mut(j).scale_mut(1.0 / s);
    }
    let f = svd(&b)?;
    let smin = f.s[f.s.len() - 1];
    let condition = if smin > 0.0 { f.max() / smin } else { f64::INFINITY };
    let x = f.solve(y, 1e-15);
    let residual = (y - &b * &x).amax();

    let channels = y.ncols();
    let mut components = Vec::new();
    let mut j = 0;
    for r in rates {
        for p in 0..=r.power {
            let re = x.row(j).transpose() / norms[j];
            if r.value.im > 0.0 {
                let im = x.row(j + 1).transpose() / norms[j + 1];
                // c1 e cos + c2 e sin = a e^{μτ} + conj(a) e^{μ̄τ}, a = (c1 - i c2)/2
                let a = DVector::from_fn(channels, |c, _| Complex64::new(re[c], -im[c]) / 2.0);
                components.push(ExpComponent {
                    rate: r.value,
                    power: p,
                    amplitudes: a.clone(),
                });
                components.push(ExpComponent {
                    rate: r.value.conj(),
                    power: p,
                    amplitudes: a.map(|v| v.conj()),
                });
                j += 2;
            } else {
                components.push(ExpComponent {
                    rate: r.value,
                    power: p,
                    amplitudes: re.map(|v| Complex64::new(v, 0.0)),
                });
                j += 1;
            }
        }
    }
    Ok((components, condition, residual))
}
