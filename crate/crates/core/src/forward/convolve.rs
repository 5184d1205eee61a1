//! Exact convolution of exponential-sum kernels against piecewise-linear data.
//!
//! For a term `e^{μt}` the running convolution obeys
//! `y_{n+1} = e^{μ dt} y_n + dt (f_n I₁(z) + f_{n+1} (I₀(z) - I₁(z)))` with
//! `z = μ dt` and `I_m(z) = ∫₀¹ x^m e^{zx} dx`. Terms `t e^{μt}` carry the
//! auxiliary power-zero state along.

use super::kernels::ExpTerm;
use num_complex::Complex64;

/// `I_m(z) = ∫₀¹ x^m e^{zx} dx` for `m = 0, 1, 2`.
pub(crate) fn phi_integrals(z: Complex64) -> [Complex64; 3] {
    if z.norm() < 0.5 {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (m, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0); // z^j / j!
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..40 {
                acc += term / (m + j + 1) as f64;
                term = term * z / (j + 1) as f64;
                if term.norm() < 1e-18 {
                    break;
                }
            }
            *slot = acc;
        }
        out
    } else {
        let ez = z.exp();
        let i0 = (ez - 1.0) / z;
        let i1 = (ez - i0) / z;
        let i2 = (ez - 2.0 * i1) / z;
        [i0, i1, i2]
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    decay: Complex64,
    w_prev: Complex64,
    w_next: Complex64,
    // power-one weights
    w2_prev: Complex64,
    w2_next: Complex64,
}

#[derive(Debug, Clone)]
pub(crate) struct Convolver {
    terms: Vec<ExpTerm>,
    steps: Vec<Step>,
    dt: f64,
}

/// Running state per term: `(∫ e^{μ(t-τ)} f, ∫ (t-τ) e^{μ(t-τ)} f)`.
pub(crate) type TermState = (Complex64, Complex64);

impl Convolver {
    pub(crate) fn new(terms: &[ExpTerm], dt: f64) -> Self {
        let steps = terms
            .iter()
            .map(|t| {
                let z = t.rate * dt;
                let [i0, i1, i2] = phi_integrals(z);
                Step {
                    decay: z.exp(),
                    w_prev: i1 * dt,
                    w_next: (i0 - i1) * dt,
                    w2_prev: i2 * dt * dt,
                    w2_next: (i1 - i2) * dt * dt,
                }
            })
            .collect();
        Self {
            terms: terms.to_vec(),
            steps,
            dt,
        }
    }

    /// Convolution samples `(K * f)(n dt)` for the sampled forcing `f`.
    pub(crate) fn run(&self, forcing: &[f64]) -> Vec<f64> {
        self.run_capture(forcing, None).0
    }

    /// Also returns the term states after sample `capture`.
    pub(crate) fn run_capture(
        &self,
        forcing: &[f64],
        capture: Option<usize>,
    ) -> (Vec<f64>, Vec<TermState>) {
        let zero = Complex64::new(0.0, 0.0);
        let mut state: Vec<TermState> = vec![(zero, zero); self.terms.len()];
        let mut captured = Vec::new();
        let mut out = Vec::with_capacity(forcing.len());
        if forcing.is_empty() {
            return (out, captured);
        }
        out.push(0.0);
        if capture == Some(0) {
            captured = state.clone();
        }
        for n in 0..forcing.len() - 1 {
            let (f0, f1) = (forcing[n], forcing[n + 1]);
            let mut value = 0.0;
            for ((term, step), s) in self.terms.iter().zip(&self.steps).zip(state.iter_mut()) {
                let y0 = s.0;
                let new0 = step.decay * y0 + step.w_prev * f0 + step.w_next * f1;
                if term.power == 1 {
                    s.1 = step.decay * (s.1 + y0 * self.dt) + step.w2_prev * f0 + step.w2_next * f1;
                    value += (term.coef * s.1).re;
                } else {
                    value += (term.coef * new0).re;
                }
                s.0 = new0;
            }
            out.push(value);
            if capture == Some(n + 1) {
                captured = state.clone();
            }
        }
        (out, captured)
    }
}

/// Free evolution of captured states over `elapsed` time with zero forcing.
pub(crate) fn continue_states(terms: &[ExpTerm], states: &[TermState], elapsed: f64) -> f64 {
    terms
        .iter()
        .zip(states)
        .map(|(term, &(y0, y1))| {
            let e = (term.rate * elapsed).exp();
            if term.power == 1 {
                (term.coef * e * (y1 + y0 * elapsed)).re
            } else {
                (term.coef * e * y0).re
            }
        })
        .sum()
}
