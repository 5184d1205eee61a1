//! Roots of `z² + λz + λ = 0` and the damped modal kernels.
//!
//! The source kernel has Laplace transform `1/(s² + λs + λ)`; the boundary
//! kernel has `-(s + 1)/(s² + λs + λ)`.

use num_complex::Complex64;

/// Eigenvalues within this distance of 4 take the critical branch.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Underdamped,
    Critical,
    Overdamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair {
    pub plus: Complex64,
    pub minus: Complex64,
    pub regime: Regime,
}

impl RootPair {
    pub fn gap(&self) -> Complex64 {
        self.plus - self.minus
    }
}

pub fn regime(lambda: f64) -> Regime {
    if (lambda - 4.0).abs() <= CRITICAL_TOL {
        Regime::Critical
    } else if lambda < 4.0 {
        Regime::Underdamped
    } else {
        Regime::Overdamped
    }
}

/// Roots `λ±` of `z² + λz + λ`, larger-magnitude root first then the other
/// from the product.
pub fn roots(lambda: f64) -> RootPair {
    let regime = regime(lambda);
    match regime {
        Regime::Critical => RootPair {
            plus: Complex64::new(-2.0, 0.0),
            minus: Complex64::new(-2.0, 0.0),
            regime,
        },
        Regime::Underdamped => {
            let omega = (lambda - lambda * lambda / 4.0).max(0.0).sqrt();
            RootPair {
                plus: Complex64::new(-lambda / 2.0, omega),
                minus: Complex64::new(-lambda / 2.0, -omega),
                regime,
            }
        }
        Regime::Overdamped => {
            let disc = lambda * (lambda - 4.0);
            let minus = -(lambda + disc.sqrt()) / 2.0;
            let plus = lambda / minus;
            RootPair {
                plus: Complex64::new(plus, 0.0),
                minus: Complex64::new(minus, 0.0),
                regime,
            }
        }
    }
}

/// Source kernel: `K(0) = 0`, `K'(0) = 1`, `K'' + λK' + λK = 0`.
pub fn source_kernel(lambda: f64, t: f64) -> f64 {
    match regime(lambda) {
        Regime::Critical => t * (-2.0 * t).exp(),
        Regime::Underdamped => {
            let omega = (lambda - lambda * lambda / 4.0).sqrt();
            (-lambda * t / 2.0).exp() * (omega * t).sin() / omega
        }
        Regime::Overdamped => {
            let r = roots(lambda);
            let (p, m) = (r.plus.re, r.minus.re);
            let d = p - m;
            -(p * t).exp() * (-d * t).exp_m1() / d
        }
    }
}

/// Time derivative of [`source_kernel`]; `S'(0) = 1`.
pub fn source_kernel_derivative(lambda: f64, t: f64) -> f64 {
    match regime(lambda) {
        Regime::Critical => (1.0 - 2.0 * t) * (-2.0 * t).exp(),
        Regime::Underdamped => {
            let omega = (lambda - lambda * lambda / 4.0).sqrt();
            (-lambda * t / 2.0).exp() * ((omega * t).cos() - lambda / 2.0 * (omega * t).sin() / omega)
        }
        Regime::Overdamped => {
            let r = roots(lambda);
            let (p, m) = (r.plus.re, r.minus.re);
            let d = p - m;
            (p * t).exp() * (1.0 - m * (-d * t).exp_m1() / d)
        }
    }
}

/// Solution of the modal equation with unit value and zero slope at `t = 0`.
pub fn unit_value_solution(lambda: f64, t: f64) -> f64 {
    source_kernel_derivative(lambda, t) + lambda * source_kernel(lambda, t)
}

/// Boundary kernel: `K(0) = -1`, `K'(0) = λ - 1`.
pub fn boundary_kernel(lambda: f64, t: f64) -> f64 {
    match regime(lambda) {
        Regime::Critical => (t - 1.0) * (-2.0 * t).exp(),
        Regime::Underdamped => {
            let omega = (lambda - lambda * lambda / 4.0).sqrt();
            let e = (-lambda * t / 2.0).exp();
            -e * (omega * t).cos() + (lambda / 2.0 - 1.0) / omega * e * (omega * t).sin()
        }
        Regime::Overdamped => {
            let r = roots(lambda);
            let (p, m) = (r.plus.re, r.minus.re);
            let d = p - m;
            // -(1+λ+)/d e^{λ+ t} + (1+λ-)/d e^{λ- t}, rewritten around e^{λ+ t}
            -(p * t).exp() * (1.0 - (1.0 + m) * (-d * t).exp_m1() / d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Source,
    Boundary,
}

/// One term `coef · t^power · e^{rate t}` of a kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub coef: Complex64,
    pub rate: Complex64,
    pub power: u8,
}

/// Exponential-sum form of a kernel; conjugate terms are both present so the
/// real part of the sum is the kernel.
pub fn kernel_terms(kind: KernelKind, lambda: f64) -> Vec<ExpTerm> {
    let r = roots(lambda);
    let one = Complex64::new(1.0, 0.0);
    let term = |coef, rate, power| ExpTerm { coef, rate, power };
    match (kind, r.regime) {
        (KernelKind::Source, Regime::Critical) => vec![term(one, r.plus, 1)],
        (KernelKind::Boundary, Regime::Critical) => {
            vec![term(-one, r.plus, 0), term(one, r.plus, 1)]
        }
        (KernelKind::Source, _) => {
            let d = r.gap();
            vec![term(one / d, r.plus, 0), term(-one / d, r.minus, 0)]
        }
        (KernelKind::Boundary, _) => {
            let d = r.gap();
            vec![
                term(-(one + r.plus) / d, r.plus, 0),
                term((one + r.minus) / d, r.minus, 0),
            ]
        }
    }
}

pub fn eval_terms(terms: &[ExpTerm], t: f64) -> f64 {
    terms
        .iter()
        .map(|e| (e.coef * (e.rate * t).exp() * t.powi(e.power as i32)).re)
        .sum()
}

/// Closed-form Laplace transforms of the two kernels.
pub fn kernel_laplace(kind: KernelKind, lambda: f64, s: f64) -> f64 {
    let den = s * s + lambda * s + lambda;
    match kind {
        KernelKind::Source => 1.0 / den,
        KernelKind::Boundary => -(s + 1.0) / den,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_examples() {
        let r = roots(4.0);
        assert_eq!((r.plus.re, r.minus.re), (-2.0, -2.0));
        let r = roots(0.0);
        assert_eq!((r.plus.norm(), r.minus.norm()), (0.0, 0.0));
        let r = roots(5.0);
        let s5 = 5f64.sqrt();
        assert!((r.plus.re - (-5.0 + s5) / 2.0).abs() < 1e-14);
        assert!((r.minus.re - (-5.0 - s5) / 2.0).abs() < 1e-14);
        for z in [r.plus.re, r.minus.re] {
            assert!((z * z + 5.0 * z + 5.0).abs() < 1e-12);
        }
        assert_eq!(r.regime, Regime::Overdamped);
    }

    #[test]
    fn kernel_examples() {
        assert!((source_kernel(4.0, 1.0) - (-2f64).exp()).abs() < 1e-15);
        assert!((source_kernel(4.0, 1.0) - 0.135335).abs() < 1e-6);
        let t = std::f64::consts::FRAC_PI_2;
        assert!((source_kernel(2.0, t) - (-t).exp()).abs() < 1e-14);
        for l in [0.5, 2.0, 4.0, 7.0] {
            assert_eq!(source_kernel(l, 0.0), 0.0);
            assert!((boundary_kernel(l, 0.0) + 1.0).abs() < 1e-14);
        }
        for t in [0.0, 0.3, 2.0] {
            let want = -(-2.0_f64 * t).exp() + t * (-2.0_f64 * t).exp();
            assert!((boundary_kernel(4.0, t) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for l in [0.7, 4.0, 4.0 + 1e-9, 30.0] {
            assert!(source_kernel(l, 80.0).is_finite() && boundary_kernel(l, 80.0).is_finite());
            assert!(source_kernel_derivative(l, 80.0).is_finite());
            assert!((source_kernel_derivative(l, 0.0) - 1.0).abs() < 1e-14);
            for t in [0.05, 0.4, 2.5] {
                let h = 1e-6;
                let fd = (source_kernel(l, t + h) - source_kernel(l, t - h)) / (2.0 * h);
                assert!((source_kernel_derivative(l, t) - fd).abs() < 1e-6, "{l} {t}");
            }
            assert!((unit_value_solution(l, 0.0) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn terms_agree_with_pointwise_formulas() {
        for l in [0.7, 3.0, 4.0, 4.5, 30.0] {
            for t in [0.0, 0.1, 1.0, 3.7] {
                let s = eval_terms(&kernel_terms(KernelKind::Source, l), t);
                let b = eval_terms(&kernel_terms(KernelKind::Boundary, l), t);
                assert!((s - source_kernel(l, t)).abs() < 1e-13, "{l} {t}");
                assert!((b - boundary_kernel(l, t)).abs() < 1e-13, "{l} {t}");
            }
        }
    }
}
