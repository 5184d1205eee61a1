//! The modal kernels of the strongly damped wave equation across the three
//! damping regimes, with their Laplace transforms checked by quadrature.

use dampspec::forward::*;

fn main() {
    for lambda in [1.0, 4.0, 9.0] {
        let r = roots(lambda);
        println!(
            "λ = {lambda}: {:?}, roots {:.4} and {:.4}",
            r.regime, r.plus, r.minus
        );
        for t in [0.0, 0.5, 1.0, 2.0, 4.0] {
            println!(
                "  t = {t:3.1}  source {:+.6}  boundary {:+.6}",
                source_kernel(lambda, t),
                boundary_kernel(lambda, t)
            );
        }
        // Composite Simpson on [0, 60] against the closed forms.
        let (n, h) = (60_000usize, 1e-3);
        for s in [0.5, 1.0, 2.0] {
            let integral = |f: &dyn Fn(f64) -> f64| -> f64 {
                let sum: f64 = (0..=n)
                    .map(|i| {
                        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                        let t = i as f64 * h;
                        w * f(t) * (-s * t).exp()
                    })
                    .sum();
                sum * h / 3.0
            };
            let src = integral(&|t| source_kernel(lambda, t));
            let bnd = integral(&|t| boundary_kernel(lambda, t));
            println!(
                "  s = {s}: source {:.3e} off, boundary {:.3e} off",
                (src - kernel_laplace(KernelKind::Source, lambda, s)).abs(),
                (bnd - kernel_laplace(KernelKind::Boundary, lambda, s)).abs()
            );
        }
    }
}
