//! Gauss–Laguerre rules and a radial × angular product grid for integrating
//! Gaussian-weighted functions over the complex plane.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Nodes and weights for `∫₀^∞ e^{−u} f(u) du ≈ Σ wᵢ f(uᵢ)`, from the
/// eigen-decomposition of the Laguerre Jacobi matrix (Golub–Welsch).
pub fn gauss_laguerre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order > 0, "quadrature order must be positive");
    let mut jacobi = DMatrix::<f64>::zeros(order, order);
    for i in 0..order {
        jacobi[(i, i)] = (2 * i + 1) as f64;
        if i + 1 < order {
            let off = (i + 1) as f64;
            jacobi[(i, i + 1)] = off;
            jacobi[(i + 1, i)] = off;
        }
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &u)| (u, eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Integrates `f` against the normalized Gaussian density
/// `(c/π) e^{−c|z|²}` on the complex plane using `order` Gauss–Laguerre
/// nodes in `u = c|z|²` and `order` equally spaced angles.
pub fn gaussian_plane_integral<F: FnMut(C64) -> f64>(width: f64, order: usize, mut f: F) -> f64 {
    let (nodes, weights) = gauss_laguerre(order);
    let angles = order;
    let dtheta = 2.0 * PI / angles as f64;
    let mut total = 0.0;
    for (u, w) in nodes.iter().zip(&weights) {
        let r = (u / width).sqrt();
        let ring: f64 = (0..angles).map(|j| f(C64::from_polar(r, j as f64 * dtheta))).sum();
        total += w * ring / angles as f64;
    }
    total
}

/// Integral together with the change observed when the grid order was last
/// doubled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveIntegral {
    pub value: f64,
    pub error_estimate: f64,
    pub order: usize,
}

/// Doubles the grid order from 16 up to `max_order` until two successive
/// estimates agree within `tol`.
pub fn adaptive_gaussian_integral<F: FnMut(C64) -> f64>(width: f64, tol: f64, max_order: usize, mut f: F) -> AdaptiveIntegral {
    let mut order = 16;
    let mut previous = gaussian_plane_integral(width, order, &mut f);
    loop {
        let next_order = order * 2;
        let value = gaussian_plane_integral(width, next_order, &mut f);
        let error_estimate = (value - previous).abs();
        if error_estimate <= tol || next_order >= max_order {
            return AdaptiveIntegral { value, error_estimate, order: next_order };
        }
        previous = value;
        order = next_order;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laguerre_rule_integrates_polynomials() {
        let (u, w) = gauss_laguerre(20);
        let moment = |p: i32| u.iter().zip(&w).map(|(x, wt)| wt * x.powi(p)).sum::<f64>();
        // ∫ e^{-u} u^p = p!
        assert_relative_eq!(moment(0), 1.0, epsilon = 1e-13);
        assert_relative_eq!(moment(1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(moment(5), 120.0, max_relative = 1e-12);
        assert_relative_eq!(moment(10), 3_628_800.0, max_relative = 1e-11);
    }

    #[test]
    fn plane_integral_of_gaussian() {
        // ∫ (c/π)e^{−c|z|²} e^{−a|z|²} d²z = c/(c+a)
        let value = gaussian_plane_integral(0.75, 32, |z| (-0.4 * z.norm_sqr()).exp());
        assert_relative_eq!(value, 0.75 / 1.15, epsilon = 1e-13);
        let shifted = adaptive_gaussian_integral(1.0, 1e-12, 256, |z| (-(z - C64::new(0.5, 0.2)).norm_sqr()).exp());
        // (1/2) e^{−|z0|²/2}
        assert_relative_eq!(shifted.value, 0.5 * (-0.29f64 / 2.0).exp(), epsilon = 1e-11);
    }
}
