//! Gauss–Legendre quadrature used for integrals of temporal bumps.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::sync::OnceLock;

const ORDER: usize = 48;

/// Nodes and weights on [-1, 1] from the Golub–Welsch eigenproblem.
fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut jacobi = DMatrix::<f64>::zeros(ORDER, ORDER);
        for k in 1..ORDER {
            let kf = k as f64;
            let b = kf / (4.0 * kf * kf - 1.0).sqrt();
            jacobi[(k - 1, k)] = b;
            jacobi[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..ORDER)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], 2.0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    })
}

/// Composite Gauss–Legendre integral of a complex integrand over `[a, b]`
/// split into `panels` equal panels.
pub(crate) fn integrate_complex<F>(a: f64, b: f64, panels: usize, f: F) -> Complex64
where
    F: Fn(f64) -> Complex64,
{
    let (nodes, weights) = rule();
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for (x, w) in nodes.iter().zip(weights) {
            total += f(mid + half * x) * (w * half);
        }
    }
    total
}

pub(crate) fn integrate<F>(a: f64, b: f64, panels: usize, f: F) -> f64
where
    F: Fn(f64) -> f64,
{
    integrate_complex(a, b, panels, |t| Complex64::new(f(t), 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_exponentials() {
        let v = integrate(0.0, 2.0, 1, |t| t.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-11);
        let e = integrate(0.0, 1.0, 4, |t| (-30.0 * t).exp());
        assert!((e - (1.0 - (-30f64).exp()) / 30.0).abs() < 1e-15);
    }
}
