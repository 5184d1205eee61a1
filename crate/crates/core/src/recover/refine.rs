//! Variable-projection refinement of eigenvalues against measured data.
//!
//! For fixed eigenvalues the data is linear in the per-channel weights of each
//! modal response, so only the eigenvalues are iterated (Levenberg–Marquardt
//! on `ln λ`), with the weights eliminated by least squares.

use crate::forward::{kernel_laplace, source_kernel, source_kernel_derivative, unit_value_solution, KernelKind};
use crate::probe::Bump;
use crate::linalg::svd;
use crate::quad;
use nalgebra::{DMatrix, DVector};

/// Response shapes of one mode, sampled where the data lives.
#[derive(Debug, Clone)]
pub(crate) enum ModalBasis<'a> {
    /// `(K_λ * a)(t_ref + τ)` at the given offsets `τ ≥ 0`, after the bump has ended.
    Time {
        kind: KernelKind,
        bump: &'a Bump,
        t_ref: f64,
        offsets: &'a [f64],
    },
    /// The kernel transform at real points, scaled by per-point weights.
    Laplace {
        kind: KernelKind,
        points: &'a [f64],
        weights: &'a [f64],
    },
}

type Kernel = Box<dyn Fn(f64) -> f64>;

/// The kernel and its derivative.
fn kernel_pair(kind: KernelKind, lambda: f64) -> (Kernel, Kernel) {
    match kind {
        KernelKind::Source => (
            Box::new(move |s| source_kernel(lambda, s)),
            Box::new(move |s| source_kernel_derivative(lambda, s)),
        ),
        KernelKind::Boundary => (
            Box::new(move |s| -source_kernel_derivative(lambda, s) - source_kernel(lambda, s)),
            Box::new(move |s| {
                (lambda - 1.0) * source_kernel_derivative(lambda, s) + lambda * source_kernel(lambda, s)
            }),
        ),
    }
}

fn panels(lambda: f64, width: f64) -> usize {
    ((lambda.max(1.0) * width / 2.0).ceil() as usize + 2).min(400)
}

/// Value and slope of `K_λ * a` at `t ≥` the end of the bump.
fn response_after(kind: KernelKind, bump: &Bump, lambda: f64, t: f64) -> (f64, f64) {
    let (t0, t1) = bump.support();
    let (k, dk) = kernel_pair(kind, lambda);
    let n = panels(lambda, t1 - t0);
    (
        quad::integrate(t0, t1, n, |tau| k(t - tau) * bump.value(tau)),
        quad::integrate(t0, t1, n, |tau| dk(t - tau) * bump.value(tau)),
    )
}

impl ModalBasis<'_> {
    pub fn len(&self) -> usize {
        match self {
            Self::Time { offsets, .. } => offsets.len(),
            Self::Laplace { points, .. } => points.len(),
        }
    }

    pub fn column(&self, lambda: f64) -> DVector<f64> {
        match *self {
            Self::Time {
                kind,
                bump,
                t_ref,
                offsets,
            } => {
                let (g0, g1) = response_after(kind, bump, lambda, t_ref);
                DVector::from_fn(offsets.len(), |n, _| {
                    let tau = offsets[n];
                    g0 * unit_value_solution(lambda, tau) + g1 * source_kernel(lambda, tau)
                })
            }
            Self::Laplace {
                kind,
                points,
                weights,
            } => DVector::from_fn(points.len(), |i, _| {
                weights[i] * kernel_laplace(kind, lambda, points[i])
            }),
        }
    }

    fn matrix(&self, lambdas: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.len(), lambdas.len());
        for (j, &l) in lambdas.iter().enumerate() {
            b.set_column(j, &self.column(l));
        }
        b
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Refined {
    pub lambdas: Vec<f64>,
    /// One row of channel weights per eigenvalue.
    pub weights: DMatrix<f64>,
    /// Max-norm residual relative to the data.
    pub residual: f64,
}

/// Least-squares fit for fixed eigenvalues: weights, residual, and an
/// orthonormal basis of the fitted column space.
struct Projection {
    weights: DMatrix<f64>,
    residual: DMatrix<f64>,
    range: DMatrix<f64>,
}

fn project(basis: &ModalBasis, lambdas: &[f64], y: &DMatrix<f64>) -> Projection {
    let mut b = basis.matrix(lambdas);
    let norms: Vec<f64> = b.column_iter().map(|c| c.norm().max(1e-300)).collect();
    for (j, s) in norms.iter().enumerate() {
        b.column_mut(j).scale_mut(1.0 / s);
    }
    let (mut weights, range) = match svd(&b) {
        Ok(dec) => {
            let r = dec.rank(1e-14);
            (dec.solve(y, 1e-14), dec.u.columns(0, r).into_owned())
        }
        Err(_) => (DMatrix::zeros(b.ncols(), y.ncols()), DMatrix::zeros(b.nrows(), 0)),
    };
    let residual = y - &b * &weights;
    for (j, s) in norms.iter().enumerate() {
        weights.row_mut(j).scale_mut(1.0 / s);
    }
    Projection { weights, residual, range }
}

/// Levenberg–Marquardt on `ln λ` with the variable-projection Jacobian
/// `∂r/∂θ_j ≈ -P⊥ (∂b_j/∂θ_j) x_j`, where `x_j` is the weight row of column `j`.
fn lm(basis: &ModalBasis, theta: &mut [f64], y: &DMatrix<f64>) {
    let eval = |t: &[f64]| {
        let l: Vec<f64> = t.iter().map(|v| v.exp()).collect();
        let p = project(basis, &l, y);
        (p.residual.norm_squared(), p)
    };
    let scale = y.norm_squared();
    let (mut f, mut p) = eval(theta);
    let mut damping = 1e-3;
    let h = 1e-5;
    for _ in 0..200 {
        if f <= 1e-30 * scale {
            break;
        }
        let k = theta.len();
        let mut jac = DMatrix::zeros(p.residual.len(), k);
        for j in 0..k {
            let db = (basis.column((theta[j] + h).exp()) - basis.column((theta[j] - h).exp())) / (2.0 * h);
            let mut d = &db * p.weights.row(j);
            let coef = p.range.transpose() * &d;
            d -= &p.range * coef;
            jac.set_column(j, &DVector::from_column_slice(d.as_slice()));
        }
        let rv = DVector::from_column_slice(p.residual.as_slice());
        let jtj = jac.transpose() * &jac;
        // r = y - Bx, so ∂r/∂θ = -P⊥ ∂B x
        let jtr = -(jac.transpose() * rv);
        let mut improved = false;
        while damping < 1e12 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] += damping * jtj[(i, i)].max(1e-300);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                damping *= 4.0;
                continue;
            };
            let trial: Vec<f64> = theta
                .iter()
                .zip(step.iter())
                .map(|(t, s)| (t + s).clamp(LN_LAMBDA_RANGE.0, LN_LAMBDA_RANGE.1))
                .collect();
            let (ft, pt) = eval(&trial);
            if ft.is_finite() && ft < f {
                let small = step.amax() < 1e-13;
                theta.copy_from_slice(&trial);
                f = ft;
                p = pt;
                damping = (damping / 3.0).max(1e-12);
                improved = !small;
                break;
            }
            damping *= 4.0;
        }
        if !improved {
            break;
        }
    }
}

/// Search range for `ln λ`.
const LN_LAMBDA_RANGE: (f64, f64) = (-16.0, 12.0);

/// Factor by which a component must reduce the squared residual to be kept
/// (tenfold in norm).
const SIGNIFICANCE: f64 = 1e2;

/// Iterates the eigenvalues, pruning collapsed or weightless ones; returns the
/// survivors and the squared residual.
fn fit(basis: &ModalBasis, y: &DMatrix<f64>, mut lambdas: Vec<f64>) -> (Vec<f64>, f64) {
    for _ in 0..4 {
        let mut theta: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
        lm(basis, &mut theta, y);
        let next: Vec<f64> = theta.iter().map(|t| t.exp()).collect();
        let x = project(basis, &next, y).weights;
        let norms: Vec<f64> = x.row_iter().map(|r| r.norm()).collect();
        let peak = norms.iter().copied().fold(0.0, f64::max);
        let mut order: Vec<usize> = (0..next.len()).collect();
        order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
        let mut kept: Vec<f64> = Vec::new();
        for i in order {
            let l = next[i];
            if norms[i] > 1e-9 * peak && l.is_finite() && !kept.iter().any(|k| (k - l).abs() <= 1e-6 * l) {
                kept.push(l);
            }
        }
        kept.sort_by(f64::total_cmp);
        let done = kept.len() == next.len();
        lambdas = kept;
        if done {
            break;
        }
    }
    let cost = project(basis, &lambdas, y).residual.norm_squared();
    (lambdas, cost)
}

/// Refines `initial` eigenvalues against the data `y` (samples × channels).
/// Refines the `seeds` against the data `y` (samples × channels). A `reserve`
/// candidate joins only if it reduces the residual significantly, and any
/// member whose removal barely matters is dropped.
pub(crate) fn refine(basis: &ModalBasis, y: &DMatrix<f64>, seeds: &[f64], reserve: &[f64]) -> Refined {
    let clean = |v: &[f64]| {
        let mut out: Vec<f64> = v.iter().copied().filter(|l| *l > 0.0 && l.is_finite()).collect();
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
        out
    };
    let (lambdas, mut reserve) = (clean(seeds), clean(reserve));
    let scale = y.amax();
    if scale == 0.0 || (lambdas.is_empty() && reserve.is_empty()) {
        return Refined {
            weights: DMatrix::zeros(lambdas.len(), y.ncols()),
            lambdas,
            residual: if scale == 0.0 { 0.0 } else { 1.0 },
        };
    }
    // compress channels
    let yc = match svd(y) {
        Ok(dec) => dec.scaled_left(dec.rank(1e-14).min(lambdas.len() + reserve.len() + 8)),
        Err(_) => y.clone(),
    };
    let floor = 1e-28 * yc.norm_squared();

    let (mut lambdas, mut cost) = if lambdas.is_empty() {
        (lambdas, yc.norm_squared())
    } else {
        fit(basis, &yc, lambdas)
    };
    while !reserve.is_empty() && cost > floor {
        let (pick, (next, next_cost)) = reserve
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut trial = lambdas.clone();
                trial.push(c);
                (i, fit(basis, &yc, trial))
            })
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("reserve is non-empty");
        if next_cost * SIGNIFICANCE > cost {
            break;
        }
        reserve.remove(pick);
        lambdas = next;
        cost = next_cost;
    }
    while lambdas.len() > 1 {
        let best = (0..lambdas.len())
            .map(|i| {
                let mut trial = lambdas.clone();
                trial.remove(i);
                fit(basis, &yc, trial)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least two candidates");
        if best.1 > SIGNIFICANCE * cost.max(floor) {
            break;
        }
        lambdas = best.0;
        cost = best.1.min(cost);
    }
    let p = project(basis, &lambdas, y);
    Refined {
        residual: p.residual.amax() / scale,
        weights: p.weights,
        lambdas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::make_bump;

    #[test]
    fn laplace_refinement_recovers_exact_eigenvalues() {
        let points: Vec<f64> = (0..40).map(|i| 0.5 + 0.5 * i as f64).collect();
        let basis = ModalBasis::Laplace {
            kind: KernelKind::Source,
            points: &points,
            weights: &vec![1.0; points.len()],
        };
        let y = DMatrix::from_fn(points.len(), 2, |i, c| {
            let s = points[i];
            let q = |l: f64| s * s + l * s + l;
            if c == 0 { 1.0 / q(5.0) + 2.0 / q(9.0) } else { -0.5 / q(9.0) }
        });
        let r = refine(&basis, &y, &[5.05, 8.9], &[14.0]);
        assert_eq!(r.lambdas.len(), 2);
        assert!((r.lambdas[0] - 5.0).abs() < 1e-10 && (r.lambdas[1] - 9.0).abs() < 1e-10, "{:?}", r.lambdas);
        assert!((r.weights[(1, 0)] - 2.0).abs() < 1e-8 && (r.weights[(1, 1)] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn time_basis_matches_convolution() {
        let bump = make_bump(0.5, 1.5, 4).unwrap();
        for kind in [KernelKind::Source, KernelKind::Boundary] {
            for l in [1.0, 4.0, 20.0] {
                let basis = ModalBasis::Time {
                    kind,
                    bump: &bump,
                    t_ref: 2.0,
                    offsets: &[0.0, 0.25, 0.5, 0.75, 1.0],
                };
                let col = basis.column(l);
                for n in 0..5 {
                    let t = 2.0 + 0.25 * n as f64;
                    let k = |s: f64| match kind {
                        KernelKind::Source => source_kernel(l, s),
                        KernelKind::Boundary => crate::forward::boundary_kernel(l, s),
                    };
                    let direct = quad::integrate(0.5, 1.5, 20, |tau| k(t - tau) * bump.value(tau));
                    assert!((col[n] - direct).abs() < 1e-12, "{kind:?} {l} {n}");
                }
            }
        }
    }
}
