//! Deterministic maps of the second-order theory.
//!
//! With P(b) := 1 - (1-rho)^b - b rho (1-rho)^(b-1),
//!
//! * s_alpha(rho) = rho^2 P(2 alpha) / P(alpha+1)^2, the limit of the
//!   S-statistic;
//! * q_alpha(rho) = gamma1^(alpha-2) Gamma(alpha+1) P(alpha) / (2 rho^2 (1-rho)^(alpha-2)),
//!   the limit of the Q-statistic, normalized so that q_2 = 1;
//! * delta(alpha) = alpha (alpha+1)^2 Gamma(alpha)^2 / (4 Gamma(2 alpha)).

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Bisection bracket for the numeric inverse of s_alpha.
pub const RHO_BRACKET: (f64, f64) = (-1e6, -1e-8);
const MAX_BISECTION_STEPS: usize = 200;
const INVERSE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotone {
    Increasing,
    Decreasing,
}

/// Open interval of S-values reachable by s_alpha on rho < 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaProfile {
    pub alpha: f64,
    pub delta: f64,
    /// Limit of s_alpha as rho -> -inf: (2 alpha - 1) / alpha^2.
    pub limit_at_neg_infinity: f64,
    /// Limit of s_alpha as rho -> 0-: 4 (2 alpha - 1) / (alpha (alpha+1)^2).
    pub limit_at_zero: f64,
    pub direction: Monotone,
}

impl AlphaProfile {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let limit_at_neg_infinity = (2.0 * alpha - 1.0) / (alpha * alpha);
        let limit_at_zero = 4.0 * (2.0 * alpha - 1.0) / (alpha * (alpha + 1.0).powi(2));
        let direction = if alpha < 0.5 {
            Monotone::Increasing
        } else {
            Monotone::Decreasing
        };
        Ok(Self {
            alpha,
            delta: delta(alpha),
            limit_at_neg_infinity,
            limit_at_zero,
            direction,
        })
    }

    /// (lo, hi), both excluded.
    pub fn region(&self) -> (f64, f64) {
        let (a, b) = (self.limit_at_neg_infinity, self.limit_at_zero);
        (a.min(b), a.max(b))
    }

    pub fn contains(&self, s: f64) -> bool {
        let (lo, hi) = self.region();
        s > lo && s < hi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 0.5 || alpha == 1.0 {
        return Err(Error::Domain(format!(
            "alpha must lie in (0, 1/2) U (1/2, inf) minus {{1}}, got {alpha}"
        )));
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho < 0.0 && rho.is_finite()) {
        return Err(Error::Domain(format!("rho must be negative and finite, got {rho}")));
    }
    Ok(())
}

pub fn delta(alpha: f64) -> f64 {
    alpha * (alpha + 1.0).powi(2) * gamma(alpha).powi(2) / (4.0 * gamma(2.0 * alpha))
}

/// P(b) = 1 - (1-rho)^b - b rho (1-rho)^(b-1).
///
/// For small |rho| the closed form cancels catastrophically; there the
/// power series sum_{m>=2} (m-1) binom(b, m) (-rho)^m is summed instead.
pub(crate) fn p_fn(rho: f64, b: f64) -> f64 {
    let x = -rho;
    if x < 0.05 {
        let mut binom = b * (b - 1.0) / 2.0;
        let mut power = x * x;
        let mut sum = binom * power;
        for m in 3..60 {
            binom *= (b - (m - 1) as f64) / m as f64;
            power *= x;
            let term = (m - 1) as f64 * binom * power;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        let one_minus = 1.0 - rho;
        1.0 - one_minus.powf(b) - b * rho * one_minus.powf(b - 1.0)
    }
}

pub fn s_alpha(rho: f64, alpha: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(s_alpha_unchecked(rho, alpha))
}

fn s_alpha_unchecked(rho: f64, alpha: f64) -> f64 {
    let den = p_fn(rho, alpha + 1.0);
    rho * rho * p_fn(rho, 2.0 * alpha) / (den * den)
}

/// Closed-form s_2(rho) = (3 rho^2 - 8 rho + 6) / (3 - 2 rho)^2.
pub fn s2_closed(rho: f64) -> f64 {
    (3.0 * rho * rho - 8.0 * rho + 6.0) / (3.0 - 2.0 * rho).powi(2)
}

/// Closed-form inverse of s_2 on (2/3, 3/4).
pub fn s2_inverse_closed(s: f64) -> Result<f64> {
    if !(s > 2.0 / 3.0 && s < 0.75) {
        return Err(Error::NotAdmissible { s, alpha: 2.0 });
    }
    Ok((6.0 * s - 4.0 + (3.0 * s - 2.0).sqrt()) / (4.0 * s - 3.0))
}

/// The unique rho < 0 with s_alpha(rho) = s.
pub fn s_alpha_inverse(s: f64, alpha: f64) -> Result<f64> {
    let profile = AlphaProfile::new(alpha)?;
    if !profile.contains(s) {
        return Err(Error::NotAdmissible { s, alpha });
    }
    if alpha == 2.0 {
        return s2_inverse_closed(s);
    }
    s_alpha_inverse_numeric(s, &profile)
}

/// Bisection on log(-rho) over [`RHO_BRACKET`], valid for every alpha.
pub fn s_alpha_inverse_numeric(s: f64, profile: &AlphaProfile) -> Result<f64> {
    if !profile.contains(s) {
        return Err(Error::NotAdmissible { s, alpha: profile.alpha });
    }
    let alpha = profile.alpha;
    // g(t) = s_alpha(-e^t) - s, monotone in t
    let g = |t: f64| s_alpha_unchecked(-t.exp(), alpha) - s;
    let (mut lo, mut hi) = ((-RHO_BRACKET.1).ln(), (-RHO_BRACKET.0).ln());
    let g_lo = g(lo);
    if g_lo == 0.0 {
        return Ok(-lo.exp());
    }
    if g_lo.signum() == g(hi).signum() {
        return Err(Error::NotAdmissible { s, alpha });
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid.abs() < best.0 {
            best = (g_mid.abs(), mid);
        }
        if g_mid == 0.0 {
            break;
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 > INVERSE_TOLERANCE {
        return Err(Error::Convergence {
            residual: best.0,
            iterations: MAX_BISECTION_STEPS,
        });
    }
    Ok(-best.1.exp())
}

/// Limit of the Q-statistic, q_alpha(rho; gamma1).
pub fn q_alpha(rho: f64, gamma1: f64, alpha: f64) -> Result<f64> {
    check_rho(rho)?;
    if !(gamma1 > 0.0 && alpha > 0.0) {
        return Err(Error::Domain(format!(
            "gamma1 and alpha must be positive, got {gamma1}, {alpha}"
        )));
    }
    Ok(gamma1.powf(alpha - 2.0) * gamma(alpha + 1.0) * p_fn(rho, alpha)
        / (2.0 * rho * rho * (1.0 - rho).powf(alpha - 2.0)))
}

/// Derivative of s_alpha by central differences, step max(1e-6, 1e-6 |rho|).
pub fn s_alpha_prime(rho: f64, alpha: f64) -> Result<f64> {
    check_rho(rho)?;
    let h = (1e-6 * rho.abs()).max(1e-6).min(0.5 * rho.abs());
    Ok((s_alpha_unchecked(rho + h, alpha) - s_alpha_unchecked(rho - h, alpha)) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn delta_at_two() {
        assert_relative_eq!(delta(2.0), 0.75, max_relative = 1e-14);
    }

    #[test]
    fn s2_values_and_limits() {
        assert_relative_eq!(s_alpha(-1.0, 2.0).unwrap(), 0.68, max_relative = 1e-14);
        assert_relative_eq!(s_alpha(-1e-7, 2.0).unwrap(), 2.0 / 3.0, max_relative = 1e-6);
        assert_relative_eq!(s_alpha(-1e7, 2.0).unwrap(), 0.75, max_relative = 1e-6);
        for &rho in &[-1e-4, -0.01, -0.049, -0.051, -0.3, -1.0, -2.4, -10.0, -300.0] {
            assert_relative_eq!(s_alpha(rho, 2.0).unwrap(), s2_closed(rho), max_relative = 1e-13);
        }
        assert!(s_alpha(0.0, 2.0).is_err());
        assert!(s_alpha(0.3, 2.0).is_err());
    }

    #[test]
    fn region_endpoints() {
        let p2 = AlphaProfile::new(2.0).unwrap();
        assert_relative_eq!(p2.region().0, 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(p2.region().1, 0.75, max_relative = 1e-15);
        assert_eq!(p2.direction, Monotone::Decreasing);
        let q = AlphaProfile::new(0.25).unwrap();
        assert_eq!(q.direction, Monotone::Increasing);
        assert!(AlphaProfile::new(1.0).is_err());
        assert!(AlphaProfile::new(0.5).is_err());
        assert!(AlphaProfile::new(-2.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_relative_eq!(s_alpha_inverse(0.68, 2.0).unwrap(), -1.0, max_relative = 1e-12);
        assert!(matches!(s_alpha_inverse(0.75, 2.0), Err(Error::NotAdmissible { .. })));
        assert!(matches!(s_alpha_inverse(2.0 / 3.0, 2.0), Err(Error::NotAdmissible { .. })));
        for &alpha in &[0.25, 2.0, 3.0] {
            for &rho in &[-0.25, -1.0, -2.4, -10.0] {
                let s = s_alpha(rho, alpha).unwrap();
                let back = s_alpha_inverse(s, alpha).unwrap();
                assert!((back - rho).abs() <= 1e-8, "alpha={alpha} rho={rho}: {back}");
            }
        }
    }

    #[test]
    fn q2_is_one() {
        for &rho in &[-1e-5, -0.1, -1.0, -2.4, -40.0] {
            for &g in &[0.3, 0.6, 2.0] {
                assert_relative_eq!(q_alpha(rho, g, 2.0).unwrap(), 1.0, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn exact_derivative_of_s2() {
        // d/drho (3r^2 - 8r + 6)/(3 - 2r)^2 = ((6r - 8)(3 - 2r) + 4 (3r^2 - 8r + 6)) / (3 - 2r)^3
        let r: f64 = -1.0;
        let exact = ((6.0 * r - 8.0) * (3.0 - 2.0 * r) + 4.0 * (3.0 * r * r - 8.0 * r + 6.0))
            / (3.0 - 2.0 * r).powi(3);
        assert_relative_eq!(s_alpha_prime(r, 2.0).unwrap(), exact, max_relative = 1e-6);
        assert!(s_alpha_prime(-2.4, 2.0).unwrap() < 0.0);
        assert!(s_alpha_prime(-2.4, 0.25).unwrap() > 0.0);
        assert!(s_alpha_prime(-2.4, 2.0).unwrap().is_finite());
    }
}
