//! Set-valued AAA rational fit of real-axis Laplace samples.
//!
//! All channels share one barycentric denominator
//! `D(s) = Σ_j w_j / (s - z_j)`; support points are picked greedily where
//! the current fit is worst.

use super::laplace::LaplaceSamples;
use crate::error::{invalid, Result};
use crate::linalg::{eigenvalues, svd};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Pole {
    pub location: Complex64,
    /// 1 for a simple pole, 2 for a merged pair.
    pub order: u8,
    /// Leading Laurent coefficient per channel.
    pub residue: DVector<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleFit {
    pub poles: Vec<Pole>,
    pub channels: Vec<usize>,
    /// Max-norm fit error relative to the data.
    pub residual: f64,
    pub flagged: bool,
    /// Poles dropped as spurious (right half-plane or negligible residue).
    pub discarded: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RationalOptions {
    pub stop_rtol: f64,
    pub merge_tol: f64,
    pub residual_threshold: f64,
    /// Residues below this fraction of the largest are dropped.
    pub residue_floor: f64,
}

impl Default for RationalOptions {
    fn default() -> Self {
        Self {
            stop_rtol: 1e-13,
            merge_tol: 1e-3,
            residual_threshold: 1e-8,
            residue_floor: 1e-10,
        }
    }
}

pub fn rational_pole_fit(samples: &LaplaceSamples, degree_budget: usize) -> Result<PoleFit> {
    rational_pole_fit_with(samples, degree_budget, &RationalOptions::default())
}

pub fn rational_pole_fit_with(
    samples: &LaplaceSamples,
    degree_budget: usize,
    opts: &RationalOptions,
) -> Result<PoleFit> {
    let m = samples.points.len();
    if degree_budget == 0 || m < 2 * degree_budget + 2 {
        return invalid(format!(
            "{m} sample points cannot support a degree-{degree_budget} rational fit"
        ));
    }
    let channels = samples.channels.clone();
    let scale = samples.values.amax();
    if scale == 0.0 {
        return Ok(PoleFit {
            poles: Vec::new(),
            channels,
            residual: 0.0,
            flagged: false,
            discarded: 0,
        });
    }
    // compress channels onto their leading singular directions
    let dec = svd(&samples.values)?;
    let keep = dec.rank(1e-14).min(degree_budget);
    let f = dec.scaled_left(keep);
    let expand = dec.v.columns(0, keep).into_owned();

    let z = &samples.points;
    let fit = aaa(z, &f, degree_budget + 1, opts.stop_rtol * f.amax())?;
    let residual = fit.error / f.amax();

    // poles: eigenvalues of diag(z_2..z_m) + u 1ᵀ, u_j = -w_j (z_j - z_1) / Σw
    let sup = &fit.support;
    let w = &fit.weights;
    let total: f64 = w.iter().sum();
    let mut poles = Vec::new();
    if sup.len() > 1 && total.abs() > 1e-14 * w.iter().map(|x| x.abs()).sum::<f64>() {
        let k = sup.len() - 1;
        let z1 = z[sup[0]];
        let a = DMatrix::from_fn(k, k, |i, j| {
            let zi = z[sup[i + 1]];
            let ui = -w[i + 1] * (zi - z1) / total;
            ui + if i == j { zi } else { 0.0 }
        });
        for p in eigenvalues(&a)?.iter() {
            let mut num = DVector::<Complex64>::zeros(f.ncols());
            let mut dprime = Complex64::new(0.0, 0.0);
            for (j, &sj) in sup.iter().enumerate() {
                let inv = Complex64::new(1.0, 0.0) / (p - z[sj]);
                for c in 0..f.ncols() {
                    num[c] += w[j] * f[(sj, c)] * inv;
                }
                dprime -= w[j] * inv * inv;
            }
            let res = &expand.map(|x| Complex64::new(x, 0.0)) * (num / dprime);
            poles.push(Pole {
                location: *p,
                order: 1,
                residue: res,
            });
        }
    }
    let before = poles.len();
    let peak = poles
        .iter()
        .map(|p| p.residue.iter().map(|r| r.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    poles.retain(|p| {
        p.location.re <= 0.0
            && p.residue.iter().map(|r| r.norm()).fold(0.0, f64::max) > opts.residue_floor * peak
    });
    let discarded = before - poles.len();
    let poles = merge_double_poles(poles, opts.merge_tol);
    Ok(PoleFit {
        poles,
        channels,
        residual,
        flagged: residual > opts.residual_threshold,
        discarded,
    })
}

struct Aaa {
    support: Vec<usize>,
    weights: Vec<f64>,
    error: f64,
}

fn aaa(z: &[f64], f: &DMatrix<f64>, max_support: usize, tol: f64) -> Result<Aaa> {
    let m = z.len();
    let nc = f.ncols();
    let mut r = DMatrix::from_fn(m, nc, |_, c| f.column(c).mean());
    let mut support: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut error = f64::INFINITY;
    for _ in 0..max_support {
        let next = (0..m)
            .filter(|i| !support.contains(i))
            .max_by(|&a, &b| {
                let ea = (f.row(a) - r.row(a)).norm();
                let eb = (f.row(b) - r.row(b)).norm();
                ea.total_cmp(&eb)
            })
            .expect("more samples than support points");
        support.push(next);
        let rest: Vec<usize> = (0..m).filter(|i| !support.contains(i)).collect();
        let mut loewner = DMatrix::zeros(rest.len() * nc, support.len());
        for c in 0..nc {
            for (ri, &i) in rest.iter().enumerate() {
                for (j, &sj) in support.iter().enumerate() {
                    loewner[(c * rest.len() + ri, j)] = (f[(i, c)] - f[(sj, c)]) / (z[i] - z[sj]);
                }
            }
        }
        let dec = svd(&loewner)?;
        weights = if dec.s.len() < support.len() {
            // fewer rows than columns: null vector is orthogonal to all rows
            null_vector(&dec.v.transpose())
        } else {
            dec.v.column(dec.s.len() - 1).iter().copied().collect()
        };
        error = 0.0;
        for &i in &rest {
            let mut den = 0.0;
            let mut num = vec![0.0; nc];
            for (j, &sj) in support.iter().enumerate() {
                let c = weights[j] / (z[i] - z[sj]);
                den += c;
                for (k, n) in num.iter_mut().enumerate() {
                    *n += c * f[(sj, k)];
                }
            }
            for k in 0..nc {
                r[(i, k)] = num[k] / den;
                error = error.max((f[(i, k)] - r[(i, k)]).abs());
            }
        }
        for &sj in &support {
            for k in 0..nc {
                r[(sj, k)] = f[(sj, k)];
            }
        }
        if error <= tol {
            break;
        }
    }
    Ok(Aaa {
        support,
        weights,
        error,
    })
}

fn null_vector(rows: &DMatrix<f64>) -> Vec<f64> {
    let n = rows.ncols();
    let mut basis = DMatrix::<f64>::identity(n, n);
    for i in 0..rows.nrows() {
        let r = rows.row(i).transpose();
        for j in 0..n {
            let c = basis.column(j).dot(&r);
            let upd = basis.column(j) - &r * c;
            basis.set_column(j, &upd);
        }
    }
    let j = (0..n)
        .max_by(|&a, &b| basis.column(a).norm().total_cmp(&basis.column(b).norm()))
        .expect("n > 0");
    let v = basis.column(j).normalize();
    v.iter().copied().collect()
}

/// Pole pairs closer than `tol` become one double pole with coefficient
/// `Σ r_i (p_i - p)` of `(s - p)^{-2}`.
fn merge_double_poles(mut poles: Vec<Pole>, tol: f64) -> Vec<Pole> {
    poles.sort_by(|a, b| {
        a.location
            .re
            .total_cmp(&b.location.re)
            .then(a.location.im.total_cmp(&b.location.im))
    });
    let mut out: Vec<Pole> = Vec::new();
    let mut used = vec![false; poles.len()];
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (i + 1..poles.len())
            .filter(|&j| !used[j])
            .find(|&j| (poles[j].location - poles[i].location).norm() < tol);
        match partner {
            Some(j) => {
                used[j] = true;
                let (a, b) = (&poles[i], &poles[j]);
                let mut p = (a.location + b.location) / 2.0;
                if p.im.abs() < tol {
                    p.im = 0.0;
                }
                let coef = a.residue.map(|r| r * (a.location - p))
                    + b.residue.map(|r| r * (b.location - p));
                out.push(Pole {
                    location: p,
                    order: 2,
                    residue: coef,
                });
            }
            None => out.push(poles[i].clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::laplace::{log_points, LaplaceNormalization};

    fn samples(f: impl Fn(f64) -> f64) -> LaplaceSamples {
        let points = log_points(0.1, 20.0, 60);
        let values = DMatrix::from_fn(points.len(), 1, |i, _| f(points[i]));
        LaplaceSamples {
            points,
            values,
            channels: vec![0],
            normalization: LaplaceNormalization::DividedByBump,
        }
    }

    fn real_poles(fit: &PoleFit) -> Vec<f64> {
        let mut p: Vec<f64> = fit.poles.iter().map(|p| p.location.re).collect();
        p.sort_by(f64::total_cmp);
        p
    }

    #[test]
    fn simple_quadratic() {
        let fit = rational_pole_fit(&samples(|s| 1.0 / (s * s + 5.0 * s + 5.0)), 4).unwrap();
        let s5 = 5f64.sqrt();
        let p = real_poles(&fit);
        assert_eq!(p.len(), 2);
        assert!((p[0] - (-5.0 - s5) / 2.0).abs() < 1e-6);
        assert!((p[1] - (-5.0 + s5) / 2.0).abs() < 1e-6);
        for pole in &fit.poles {
            let other = if pole.location.re > -2.0 { (-5.0 - s5) / 2.0 } else { (-5.0 + s5) / 2.0 };
            assert!((pole.residue[0].re * (pole.location.re - other) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn double_pole_is_merged() {
        let fit = rational_pole_fit(&samples(|s| 1.0 / ((s + 2.0) * (s + 2.0))), 4).unwrap();
        assert_eq!(fit.poles.len(), 1);
        assert_eq!(fit.poles[0].order, 2);
        assert!((fit.poles[0].location.re + 2.0).abs() < 1e-3);
        assert!((fit.poles[0].residue[0].re - 1.0).abs() < 1e-3);
    }

    #[test]
    fn sum_of_two_quadratics() {
        let q = |s: f64, l: f64| s * s + l * s + l;
        let fit = rational_pole_fit(&samples(|s| 1.0 / q(s, 5.0) + 2.0 / q(s, 9.0)), 6).unwrap();
        assert_eq!(fit.poles.len(), 4);
        let mut found = Vec::new();
        for (l, weight) in [(5.0_f64, 1.0), (9.0, 2.0)] {
            let d = (l * (l - 4.0)).sqrt();
            let plus = (-l + d) / 2.0;
            let minus = (-l - d) / 2.0;
            let pole = fit
                .poles
                .iter()
                .find(|p| (p.location.re - plus).abs() < 1e-6)
                .expect("slow root");
            let scaled = pole.residue[0].re * (plus - minus);
            assert!((scaled - weight).abs() < 1e-6, "{scaled}");
            found.push(scaled);
        }
        assert_eq!(found.len(), 2);
    }

    #[test]
    fn rejects_short_samples() {
        let s = samples(|s| 1.0 / (s + 1.0));
        assert!(rational_pole_fit(&s, 40).is_err());
    }
}
