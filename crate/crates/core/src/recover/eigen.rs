//! Inversion of `μ² + λμ + λ = 0` for the eigenvalue.

use crate::error::{invalid, Result};
use num_complex::Complex64;

/// Relative mismatch above which a pair estimate is flagged.
pub const PAIR_CONSISTENCY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentInput {
    /// One real rate (either root, or the merged double root).
    Real(f64),
    /// Both real roots, in either order.
    RealPair(f64, f64),
    /// One member of a conjugate pair.
    Conjugate(Complex64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenEstimate {
    pub lambda: f64,
    /// Relative disagreement of the redundant relations; zero for a single real rate.
    pub consistency: f64,
    /// Distance of the rates from the excluded point `-1`.
    pub margin: f64,
    pub flagged: bool,
}

pub fn exponent_to_eigenvalue(input: ExponentInput) -> Result<EigenEstimate> {
    let est = match input {
        ExponentInput::Real(mu) => {
            reject_excluded(mu)?;
            EigenEstimate {
                lambda: -mu * mu / (1.0 + mu),
                consistency: 0.0,
                margin: (mu + 1.0).abs(),
                flagged: false,
            }
        }
        ExponentInput::RealPair(a, b) => {
            reject_excluded(a)?;
            reject_excluded(b)?;
            let sum = -(a + b);
            let prod = a * b;
            let consistency = (sum - prod).abs() / sum.abs();
            EigenEstimate {
                lambda: sum,
                consistency,
                margin: (a + 1.0).abs().min((b + 1.0).abs()),
                flagged: consistency > PAIR_CONSISTENCY_TOL,
            }
        }
        ExponentInput::Conjugate(mu) => {
            let lambda = -2.0 * mu.re;
            let consistency = (mu.norm_sqr() - lambda).abs() / lambda.abs();
            EigenEstimate {
                lambda,
                consistency,
                margin: (mu + 1.0).norm(),
                flagged: consistency > PAIR_CONSISTENCY_TOL,
            }
        }
    };
    if !(est.lambda > 0.0) {
        return invalid(format!(
            "rate does not correspond to a positive eigenvalue (λ = {})",
            est.lambda
        ));
    }
    Ok(est)
}

fn reject_excluded(mu: f64) -> Result<()> {
    if (mu + 1.0).abs() <= 1e-14 {
        return invalid("rate -1 is the excluded point of the modal quadratic");
    }
    Ok(())
}

/// A rate, with `power = 1` for a merged double rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RateKey {
    pub rate: Complex64,
    pub power: u8,
}

/// Eigenvalue candidate with the indices of the rates that produced it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Identified {
    pub estimate: EigenEstimate,
    pub members: Vec<usize>,
}

/// Maps distinct rates (one per conjugate pair) to eigenvalue candidates,
/// pairing the two real roots of one quadratic when both are present.
pub(crate) fn identify(rates: &[RateKey]) -> Vec<Identified> {
    let mut out = Vec::new();
    let mut plus: Vec<(usize, f64)> = Vec::new();
    let mut minus: Vec<(usize, f64)> = Vec::new();
    for (i, r) in rates.iter().enumerate() {
        let mu = r.rate;
        if mu.im > 0.0 && r.power == 0 {
            if let Ok(e) = exponent_to_eigenvalue(ExponentInput::Conjugate(mu)) {
                out.push(Identified {
                    estimate: e,
                    members: vec![i],
                });
            }
            continue;
        }
        let Ok(e) = exponent_to_eigenvalue(ExponentInput::Real(mu.re)) else {
            continue;
        };
        if r.power > 0 {
            out.push(Identified {
                estimate: e,
                members: vec![i],
            });
        } else if mu.re > -2.0 {
            plus.push((i, e.lambda));
        } else {
            minus.push((i, e.lambda));
        }
    }
    // nearest-first pairing of the slow and fast roots
    let mut cands: Vec<(f64, usize, usize)> = Vec::new();
    for (a, &(_, la)) in plus.iter().enumerate() {
        for (b, &(_, lb)) in minus.iter().enumerate() {
            let gap = (la - lb).abs() / la.max(lb);
            if gap < 1e-2 {
                cands.push((gap, a, b));
            }
        }
    }
    cands.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut used_p = vec![false; plus.len()];
    let mut used_m = vec![false; minus.len()];
    for (_, a, b) in cands {
        if used_p[a] || used_m[b] {
            continue;
        }
        used_p[a] = true;
        used_m[b] = true;
        let (ia, ib) = (plus[a].0, minus[b].0);
        if let Ok(e) = exponent_to_eigenvalue(ExponentInput::RealPair(rates[ia].rate.re, rates[ib].rate.re)) {
            out.push(Identified {
                estimate: e,
                members: vec![ia, ib],
            });
        }
    }
    for (a, &(i, _)) in plus.iter().enumerate() {
        if !used_p[a] {
            out.push(single(rates, i));
        }
    }
    for (b, &(i, _)) in minus.iter().enumerate() {
        if !used_m[b] {
            out.push(single(rates, i));
        }
    }
    out.sort_by(|a, b| a.estimate.lambda.total_cmp(&b.estimate.lambda));
    out
}

fn single(rates: &[RateKey], i: usize) -> Identified {
    Identified {
        estimate: exponent_to_eigenvalue(ExponentInput::Real(rates[i].rate.re))
            .expect("checked when classified"),
        members: vec![i],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_inversions() {
        let e = exponent_to_eigenvalue(ExponentInput::Real(-2.0)).unwrap();
        assert!((e.lambda - 4.0).abs() < 1e-14);
        let e = exponent_to_eigenvalue(ExponentInput::Conjugate(Complex64::new(-1.0, 1.0))).unwrap();
        assert!((e.lambda - 2.0).abs() < 1e-14 && e.consistency < 1e-14);
        let mu = (-5.0 + 5f64.sqrt()) / 2.0;
        let e = exponent_to_eigenvalue(ExponentInput::Real(mu)).unwrap();
        assert!((e.lambda - 5.0).abs() < 1e-12);
        assert!((mu * mu + e.lambda * mu + e.lambda).abs() < 1e-12);
        let nu = (-5.0 - 5f64.sqrt()) / 2.0;
        let e = exponent_to_eigenvalue(ExponentInput::RealPair(mu, nu)).unwrap();
        assert!((e.lambda - 5.0).abs() < 1e-12 && e.consistency < 1e-12 && !e.flagged);
    }

    #[test]
    fn excluded_and_spurious_rates() {
        assert!(exponent_to_eigenvalue(ExponentInput::Real(-1.0)).is_err());
        assert!(exponent_to_eigenvalue(ExponentInput::Real(-0.5)).is_err());
        assert!(exponent_to_eigenvalue(ExponentInput::Real(0.3)).is_err());
        let e = exponent_to_eigenvalue(ExponentInput::RealPair(-1.2, -9.0)).unwrap();
        assert!(e.flagged);
    }

    #[test]
    fn identify_pairs_roots() {
        let key = |re: f64, im: f64, power| RateKey {
            rate: Complex64::new(re, im),
            power,
        };
        let s5 = 5f64.sqrt();
        let rates = [
            key((-5.0 + s5) / 2.0, 0.0, 0),
            key(-0.5, 3f64.sqrt() / 2.0, 0),
            key((-5.0 - s5) / 2.0, 0.0, 0),
            key(-2.0, 0.0, 1),
            key(-0.3, 0.0, 0),
        ];
        let ids = identify(&rates);
        let lambdas: Vec<f64> = ids.iter().map(|i| i.estimate.lambda).collect();
        assert_eq!(lambdas.len(), 3);
        assert!((lambdas[0] - 1.0).abs() < 1e-12);
        assert!((lambdas[1] - 4.0).abs() < 1e-12);
        assert!((lambdas[2] - 5.0).abs() < 1e-12);
        assert_eq!(ids[2].members.len(), 2);
    }
}
