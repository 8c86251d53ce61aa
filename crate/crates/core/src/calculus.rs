//! Small numerical calculus kit: Laurent coefficients on circles, spectrally
//! accurate derivatives of holomorphic functions, finite differences and the
//! complex step.

use crate::C64;
use std::f64::consts::PI;

/// Laurent coefficient `c_k` of `f` around `center`, by the trapezoidal rule
/// on a circle. For functions holomorphic in an annulus the error decays
/// geometrically in `nodes`.
pub fn laurent_coefficient<F>(f: F, center: C64, radius: f64, nodes: usize, k: i32) -> C64
where
    F: Fn(C64) -> C64,
{
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..nodes {
        let theta = 2.0 * PI * (j as f64) / (nodes as f64);
        let step = C64::from_polar(radius, theta);
        acc += f(center + step) * step.powi(-k);
    }
    acc / nodes as f64
}

/// `order`-th derivative of a holomorphic `f` at `z` from its Taylor
/// coefficient on a circle (Lyness-Moler). This is the complex-step idea
/// generalised to arbitrary order.
pub fn circle_derivative<F>(f: F, z: C64, order: u32, radius: f64, nodes: usize) -> C64
where
    F: Fn(C64) -> C64,
{
    let fact: f64 = (1..=order).map(|k| k as f64).product();
    laurent_coefficient(f, z, radius, nodes, order as i32) * fact
}

/// Classic complex step for a real-analytic function of a real variable.
pub fn complex_step<F>(f: F, x: f64, h: f64) -> f64
where
    F: Fn(C64) -> C64,
{
    f(C64::new(x, h)).im / h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// Second order, three points.
    Three,
    /// Fourth order, five points.
    Five,
}

/// Central difference of order 1 or 2 of a complex valued function of a real
/// variable.
pub fn central<F>(f: F, x: f64, h: f64, order: u32, stencil: Stencil) -> C64
where
    F: Fn(f64) -> C64,
{
    match (order, stencil) {
        (1, Stencil::Three) => (f(x + h) - f(x - h)) / (2.0 * h),
        (2, Stencil::Three) => (f(x + h) - f(x) * 2.0 + f(x - h)) / (h * h),
        (1, Stencil::Five) => {
            (-f(x + 2.0 * h) + f(x + h) * 8.0 - f(x - h) * 8.0 + f(x - 2.0 * h)) / (12.0 * h)
        }
        (2, Stencil::Five) => {
            (-f(x + 2.0 * h) + f(x + h) * 16.0 - f(x) * 30.0 + f(x - h) * 16.0 - f(x - 2.0 * h))
                / (12.0 * h * h)
        }
        _ => panic!("central differences only for order 1 and 2"),
    }
}

/// Wirtinger derivatives `(∂f, ∂̄f)` of a smooth function of `z`, from
/// central differences in `x` and `y`.
pub fn wirtinger<F>(f: F, z: C64, h: f64, stencil: Stencil) -> (C64, C64)
where
    F: Fn(C64) -> C64,
{
    let fx = central(|x| f(C64::new(x, z.im)), z.re, h, 1, stencil);
    let fy = central(|y| f(C64::new(z.re, y)), z.im, h, 1, stencil);
    let i = C64::i();
    ((fx - i * fy) * 0.5, (fx + i * fy) * 0.5)
}

/// `|a - b| / max(|a|, |b|)`, or `0` when both vanish.
pub fn relative_residual(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laurent_of_a_simple_pole() {
        let z0 = C64::new(0.3, -0.2);
        let f = |z: C64| 2.0 / (z - z0) + 3.0 + (z - z0) * 5.0;
        assert!((laurent_coefficient(f, z0, 0.5, 16, -1) - 2.0).norm() < 1e-13);
        assert!((laurent_coefficient(f, z0, 0.5, 16, 0) - 3.0).norm() < 1e-13);
        assert!((laurent_coefficient(f, z0, 0.5, 16, 1) - 5.0).norm() < 1e-13);
        assert!(laurent_coefficient(f, z0, 0.5, 16, -2).norm() < 1e-13);
    }

    #[test]
    fn circle_derivative_of_exp() {
        let z = C64::new(0.4, 1.1);
        for order in 0..5 {
            let d = circle_derivative(|w: C64| w.exp(), z, order, 0.5, 32);
            assert!((d - z.exp()).norm() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn complex_step_of_sin() {
        let d = complex_step(|w: C64| w.sin(), 0.7, 1e-20);
        assert!((d - 0.7f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn stencils_converge_at_their_order() {
        let f = |x: f64| C64::new(x.exp(), 0.0);
        let e1 = (central(f, 0.3, 1e-2, 1, Stencil::Three).re - 0.3f64.exp()).abs();
        let e2 = (central(f, 0.3, 5e-3, 1, Stencil::Three).re - 0.3f64.exp()).abs();
        assert!((e1 / e2 - 4.0).abs() < 0.05);
        let e5 = (central(f, 0.3, 1e-2, 2, Stencil::Five).re - 0.3f64.exp()).abs();
        assert!(e5 < 1e-9);
    }

    #[test]
    fn wirtinger_of_conj_product() {
        let z = C64::new(0.2, 0.9);
        let (d, db) = wirtinger(|w: C64| w * w.conj() + w * w, z, 1e-3, Stencil::Five);
        assert!((d - (z.conj() + z * 2.0)).norm() < 1e-10);
        assert!((db - z).norm() < 1e-10);
    }
}
