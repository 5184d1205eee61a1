use crate::error::{invalid, Result};
use crate::quad;
use num_complex::Complex64;

/// Polynomial bump `A ((t - t0)(t1 - t))^p` on `(t0, t1)`, zero outside,
/// normalized to unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    t0: f64,
    t1: f64,
    power: u32,
    amplitude: f64,
}

/// Unit-mass polynomial bump of order `p ≥ 4` supported in `(t0, t1)`.
pub fn make_bump(t0: f64, t1: f64, p: u32) -> Result<Bump> {
    if !(t0 > 0.0 && t1 > t0 && t1.is_finite()) {
        return invalid(format!("bump support ({t0}, {t1}) must satisfy 0 < t0 < t1"));
    }
    if p < 4 {
        return invalid(format!("bump power {p} must be at least 4"));
    }
    // ∫ ((t-t0)(t1-t))^p = (t1-t0)^{2p+1} (p!)² / (2p+1)!
    let beta = (1..=p).fold(1.0, |acc, i| acc * i as f64 / (p + i) as f64) / (2 * p + 1) as f64;
    let raw_mass = (t1 - t0).powi(2 * p as i32 + 1) * beta;
    Ok(Bump {
        t0,
        t1,
        power: p,
        amplitude: 1.0 / raw_mass,
    })
}

impl Bump {
    pub fn support(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn power(&self) -> u32 {
        self.power
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        self.amplitude * ((t - self.t0) * (self.t1 - t)).powi(self.power as i32)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        if t <= self.t0 || t >= self.t1 {
            return 0.0;
        }
        let q = (t - self.t0) * (self.t1 - t);
        self.amplitude
            * self.power as f64
            * q.powi(self.power as i32 - 1)
            * (self.t0 + self.t1 - 2.0 * t)
    }

    pub fn mass(&self) -> f64 {
        quad::integrate(self.t0, self.t1, 2, |t| self.value(t))
    }

    fn panels(&self, rate: Complex64) -> usize {
        let len = self.t1 - self.t0;
        (rate.norm() * len / 4.0).ceil() as usize + 2
    }

    /// Laplace transform `∫ e^{-sτ} a(τ) dτ` at complex `s`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        quad::integrate_complex(self.t0, self.t1, self.panels(s), |t| {
            (-s * t).exp() * self.value(t)
        })
    }

    /// `∫ e^{μ (t_ref - τ)} a(τ) dτ`: the amplitude picked up by `e^{μ(t - t_ref)}`
    /// after convolving `e^{μ t}` with the bump.
    pub fn shifted_transform(&self, mu: Complex64, t_ref: f64) -> Complex64 {
        quad::integrate_complex(self.t0, self.t1, self.panels(mu), |t| {
            (mu * (t_ref - t)).exp() * self.value(t)
        })
    }

    /// Same as [`Bump::shifted_transform`] for `τ e^{μ(t_ref - τ)}`-weighted moment.
    pub fn shifted_moment(&self, mu: Complex64, t_ref: f64) -> Complex64 {
        quad::integrate_complex(self.t0, self.t1, self.panels(mu), |t| {
            (mu * (t_ref - t)).exp() * (t_ref - t) * self.value(t)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape_and_mass() {
        let b = make_bump(0.5, 1.5, 4).unwrap();
        assert!(b.value(1.0) > 0.0);
        assert_eq!(b.value(0.5), 0.0);
        assert_eq!(b.value(1.5), 0.0);
        assert!((b.mass() - 1.0).abs() < 1e-10);
        assert!(b.laplace(Complex64::new(1.0, 0.0)).re > 0.0);
        let b8 = make_bump(2.0, 2.3, 8).unwrap();
        assert!((b8.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bump_rejects_degenerate() {
        assert!(make_bump(1.0, 1.0, 4).is_err());
        assert!(make_bump(0.0, 1.0, 4).is_err());
        assert!(make_bump(0.5, 1.0, 3).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let b = make_bump(0.2, 1.0, 5).unwrap();
        for &t in &[0.3, 0.55, 0.9] {
            let fd = (b.value(t + 1e-6) - b.value(t - 1e-6)) / 2e-6;
            assert!((fd - b.derivative(t)).abs() < 1e-5 * b.derivative(t).abs().max(1.0));
        }
    }
}
