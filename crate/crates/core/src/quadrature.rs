//! Globally adaptive Gauss-Legendre quadrature.
//!
//! Each panel is integrated with an n-point rule and with the same rule on
//! its two halves; the difference is the panel's error estimate. The panel
//! with the largest estimate is split until the total estimate meets the
//! tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Requested accuracy: stop once the error estimate is at most
/// `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self { rel, abs: 0.0 }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                let step = p / d;
                x -= step;
                if step.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * d * d);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The rule mapped onto [a, b].
    pub fn apply<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integrator with a fixed rule and panel budget.
#[derive(Debug, Clone)]
pub struct Integrator {
    rule: GaussLegendre,
    max_panels: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(15, 4000)
    }
}

impl Integrator {
    pub fn new(order: usize, max_panels: usize) -> Self {
        Self {
            rule: GaussLegendre::new(order),
            max_panels: max_panels.max(1),
        }
    }

    fn panel<F: FnMut(f64) -> f64>(&self, f: &mut F, a: f64, b: f64) -> Panel {
        let mid = 0.5 * (a + b);
        let whole = self.rule.apply(f, a, b);
        let halves = self.rule.apply(f, a, mid) + self.rule.apply(f, mid, b);
        Panel {
            a,
            b,
            value: halves,
            error: (whole - halves).abs(),
        }
    }

    /// Integral of f over the finite interval [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!("finite limits required, got [{a}, {b}]")));
        }
        if a == b {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        let mut heap = BinaryHeap::new();
        let first = self.panel(&mut f, a, b);
        let (mut value, mut error) = (first.value, first.error);
        heap.push(first);
        while error > tol.target(value) {
            if !(value.is_finite() && error.is_finite()) {
                return Err(Error::Quadrature { requested: tol.rel, achieved: f64::NAN });
            }
            if heap.len() >= self.max_panels {
                return Err(Error::Quadrature {
                    requested: tol.rel,
                    achieved: error / value.abs(),
                });
            }
            let worst = heap.pop().expect("heap is never empty here");
            let mid = 0.5 * (worst.a + worst.b);
            if mid <= worst.a || mid >= worst.b {
                return Err(Error::Quadrature {
                    requested: tol.rel,
                    achieved: error / value.abs(),
                });
            }
            let left = self.panel(&mut f, worst.a, mid);
            let right = self.panel(&mut f, mid, worst.b);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
            // refresh the running sums now and then to shed rounding drift
            if heap.len() % 64 == 0 {
                value = heap.iter().map(|p| p.value).sum();
                error = heap.iter().map(|p| p.error).sum();
            }
        }
        let value: f64 = heap.iter().map(|p| p.value).sum();
        let error: f64 = heap.iter().map(|p| p.error).sum();
        Ok(Estimate { value, error })
    }

    /// Integral of f over [a, inf) through u = a + x / (1 - x), x in [0, 1).
    /// The integrand must decay fast enough for the mapped integrand to
    /// vanish at x = 1.
    pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, tol: Tolerance) -> Result<Estimate> {
        self.integrate(
            |x| {
                let one_minus = 1.0 - x;
                let v = f(a + x / one_minus) / (one_minus * one_minus);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            tol,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_is_exact_for_polynomials() {
        for order in [1, 2, 5, 15, 20] {
            let rule = GaussLegendre::new(order);
            assert_relative_eq!(rule.weights().iter().sum::<f64>(), 2.0, max_relative = 1e-14);
            for deg in 0..(2 * order) {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = rule.apply(&mut |x: f64| x.powi(deg as i32), -1.0, 1.0);
                assert!((got - exact).abs() < 1e-13, "order {order} degree {deg}: {got}");
            }
        }
    }

    #[test]
    fn five_point_nodes() {
        let rule = GaussLegendre::new(5);
        let inner = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
        assert_relative_eq!(rule.nodes()[3], inner, max_relative = 1e-14);
        assert_relative_eq!(rule.weights()[2], 128.0 / 225.0, max_relative = 1e-14);
    }

    #[test]
    fn adaptive_finite_and_singular() {
        let q = Integrator::default();
        let est = q.integrate(f64::exp, 0.0, 1.0, Tolerance::relative(1e-13)).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::E - 1.0, max_relative = 1e-13);
        // endpoint singularity x^-1/2
        let est = q.integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert_relative_eq!(est.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn semi_infinite() {
        let q = Integrator::default();
        // int_0^inf u^3 e^-u = 6
        let est = q
            .integrate_to_infinity(|u| u.powi(3) * (-u).exp(), 0.0, Tolerance::relative(1e-12))
            .unwrap();
        assert_relative_eq!(est.value, 6.0, max_relative = 1e-11);
        let est = q
            .integrate_to_infinity(|u| (-0.2 * u).exp(), 3.0, Tolerance::relative(1e-12))
            .unwrap();
        assert_relative_eq!(est.value, 5.0 * (-0.6f64).exp(), max_relative = 1e-11);
    }

    #[test]
    fn budget_exhaustion_reports_achieved() {
        let q = Integrator::new(3, 4);
        let err = q
            .integrate(|x: f64| (50.0 * x).sin(), 0.0, 10.0, Tolerance::relative(1e-14))
            .unwrap_err();
        assert!(matches!(err, Error::Quadrature { requested, .. } if requested == 1e-14));
    }
}
