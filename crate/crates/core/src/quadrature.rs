//! Gauss-Hermite expectations over a standard normal variable.
//!
//! Log-normal marginalizations are rewritten as `E[f(U)]`, `U ~ N(0, 1)`,
//! after substituting `u = (ln r - mu) / sigma`. Rules are built once per
//! order in `f64` and cast to the working scalar.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Orders tried by [`expect_standard_normal`], smallest first.
pub const ORDERS: [usize; 5] = [16, 32, 64, 128, 256];

/// Nodes and weights for the probabilists' weight `exp(-u^2/2)/sqrt(2 pi)`.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HermiteRule {
    /// Roots of the Hermite function `psi_n` are bracketed on a fine grid and
    /// polished by safeguarded Newton steps. The `exp(-x^2/2)` factor keeps
    /// the recurrence in range at high order.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let half: Vec<(f64, f64)> = positive_roots(n);
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for &(z, wz) in &half {
            x.push(z);
            w.push(wz);
        }
        if n % 2 == 1 {
            let (_, d) = hermite_function(n, 0.0);
            x.push(0.0);
            w.push(2.0 / (d * d));
        }
        for &(z, wz) in half.iter().rev() {
            x.push(-z);
            w.push(wz);
        }
        // physicists' -> probabilists'
        let inv_sqrt_pi = std::f64::consts::FRAC_2_SQRT_PI * 0.5;
        HermiteRule {
            nodes: x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
            weights: w.iter().map(|v| v * inv_sqrt_pi).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn expect<T: Scalar>(&self, mut f: impl FnMut(T) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&u, &w)| acc + T::lit(w) * f(T::lit(u)))
    }
}

/// Orthonormal Hermite function `psi_n(x)` and `sqrt(2n) psi_{n-1}(x)`.
fn hermite_function(n: usize, x: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let (mut p1, mut p2) = (PIM4 * (-0.5 * x * x).exp(), 0.0);
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Positive roots in decreasing order with their physicists' weights.
fn positive_roots(n: usize) -> Vec<(f64, f64)> {
    let hi = (2.0 * n as f64 + 1.0).sqrt() + 1.0;
    let step = 0.25 * std::f64::consts::PI / (2.0 * n as f64 + 1.0).sqrt();
    let mut roots = Vec::with_capacity(n / 2);
    let mut a = 1e-9;
    let mut fa = hermite_function(n, a).0;
    while a < hi && roots.len() < n / 2 {
        let b = (a + step).min(hi);
        let fb = hermite_function(n, b).0;
        if fa == 0.0 || fa.signum() != fb.signum() {
            roots.push(polish(n, a, b));
        }
        a = b;
        fa = fb;
    }
    assert_eq!(roots.len(), n / 2, "Hermite root scan missed a root");
    roots.reverse();
    roots
        .into_iter()
        .map(|z| {
            // derivative of the polynomial part: psi'_n = sqrt(2n) psi_{n-1} - x psi_n
            let (_, d) = hermite_function(n, z);
            let scale = (0.5 * z * z).exp();
            (z, 2.0 / (d * scale).powi(2))
        })
        .collect()
}

fn polish(n: usize, mut a: f64, mut b: f64) -> f64 {
    let fa0 = hermite_function(n, a).0;
    let mut z = 0.5 * (a + b);
    for _ in 0..100 {
        let (f, d) = hermite_function(n, z);
        if f == 0.0 {
            return z;
        }
        if f.signum() == fa0.signum() {
            a = z;
        } else {
            b = z;
        }
        // psi_n' = d - z f
        let slope = d - z * f;
        let newton = z - f / slope;
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        if (next - z).abs() <= 1e-15 * z.max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// Shared rule of one of the [`ORDERS`].
pub fn rule(order: usize) -> &'static HermiteRule {
    static RULES: [OnceLock<HermiteRule>; 5] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let k = ORDERS.iter().position(|&o| o == order).expect("order not in ORDERS");
    RULES[k].get_or_init(|| HermiteRule::new(order))
}

/// A quadrature value with the difference to the previous order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
    pub order: usize,
}

/// Absolute accuracy target for a scalar type: 1e-10 in `f64`, a few ulps
/// above round-off in `f32`.
pub fn default_tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::lit(64.0) * T::epsilon())
}

/// `E[f(U)]` for `U ~ N(0,1)`, doubling the order until two successive rules
/// agree to `tolerance`.
pub fn expect_standard_normal<T: Scalar>(f: impl Fn(T) -> T, tolerance: T) -> Result<Estimate<T>> {
    let mut prev = rule(ORDERS[0]).expect(&f);
    let mut err = T::infinity();
    for &order in &ORDERS[1..] {
        let cur = rule(order).expect(&f);
        err = (cur - prev).abs();
        if err <= tolerance {
            return Ok(Estimate { value: cur, error: err, order });
        }
        prev = cur;
    }
    Err(Error::QuadratureNonConvergence { estimate: err.as_f64(), tolerance: tolerance.as_f64() })
}
