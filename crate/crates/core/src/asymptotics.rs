//! Limiting constants and asymptotic variances.
//!
//! The Gaussian functionals behind the variances have the form
//! `int_0^1 s^(a) f(s) W(s) ds - c W(1)` with `a = -gamma/gamma2 - 1`, whose
//! variance is
//!
//! sigma^2 = int int s^a t^a min(s,t) f(s) f(t) ds dt - 2c int s^(a+1) f(s) ds + c^2.
//!
//! After `u = -log s` every integrand becomes a polynomial in u (possibly
//! with fractional powers) times an exponential, and the double integral
//! over the triangle `s < t` reduces to nested one-dimensional integrals on
//! `[0, inf)`.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{Integrator, Tolerance};
use crate::sampling::TruncationModel;
use crate::second_order::q_alpha;

/// Relative accuracy targeted by [`sigma_star_sq`] and [`sigma_alpha_sq`].
pub const VARIANCE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrderContext {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    pub rho1: f64,
    pub beta1: f64,
    pub alpha: f64,
}

impl SecondOrderContext {
    pub fn new(gamma1: f64, gamma2: f64, rho1: f64, beta1: f64, alpha: f64) -> Result<Self> {
        let finite = [gamma1, gamma2, rho1, beta1, alpha].iter().all(|v| v.is_finite());
        if !finite || gamma1 <= 0.0 || gamma2 <= 0.0 {
            return Err(Error::Domain(format!(
                "tail indices must be positive and finite, got gamma1 = {gamma1}, gamma2 = {gamma2}"
            )));
        }
        if rho1 >= 0.0 || beta1 >= 0.0 {
            return Err(Error::Domain(format!(
                "rho1 and beta1 must be negative, got {rho1}, {beta1}"
            )));
        }
        if alpha <= 0.0 {
            return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self {
            gamma1,
            gamma2,
            gamma: gamma1 * gamma2 / (gamma1 + gamma2),
            rho1,
            beta1,
            alpha,
        })
    }

    pub fn from_model(model: &TruncationModel, alpha: f64) -> Result<Self> {
        Self::new(model.gamma1, model.gamma2, model.rho1, model.beta1, alpha)
    }

    /// Whether gamma1 < gamma2, the regime the limit theory assumes.
    pub fn in_theory_regime(&self) -> bool {
        self.gamma1 < self.gamma2
    }

    /// gamma / gamma2, so that s^(-gamma/gamma2 - 1) ds = e^(b u) du.
    pub fn b(&self) -> f64 {
        self.gamma / self.gamma2
    }

    fn require_regime(&self) -> Result<()> {
        if self.in_theory_regime() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "asymptotic variance has a pole: needs gamma1 < gamma2, got {} >= {}",
                self.gamma1, self.gamma2
            )))
        }
    }
}

pub fn mu1(alpha: f64) -> f64 {
    gamma(alpha + 1.0)
}

pub fn mu2(alpha: f64, rho: f64) -> f64 {
    // 1 - (1 - rho)^alpha without cancellation for small rho
    let one_minus = -(alpha * (-rho).ln_1p()).exp_m1();
    gamma(alpha) * one_minus / (rho * (1.0 - rho).powf(alpha))
}

pub fn mu3(alpha: f64, rho: f64) -> f64 {
    let a = (-2.0 * rho).ln_1p();
    let b = (-rho).ln_1p();
    if alpha == 1.0 {
        return (2.0 * b - a) / (rho * rho);
    }
    // {(1-2rho)^(1-alpha) - 2(1-rho)^(1-alpha) + 1} / (alpha - 1), written with
    // expm1 so that it tends to 2 log(1-rho) - log(1-2rho) as alpha -> 1
    let e = 1.0 - alpha;
    let bracket = ((e * a).exp_m1() - 2.0 * (e * b).exp_m1()) / -e;
    gamma(alpha) * bracket / (rho * rho)
}

pub fn mu4(alpha: f64, rho: f64, beta: f64) -> f64 {
    (mu2(alpha, rho + beta) - mu2(alpha, rho)) / beta
}

/// Every constant entering the limit laws, evaluated for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantBundle {
    pub ctx: SecondOrderContext,
    pub m2: f64,
    pub r_alpha_plus_1: f64,
    pub r_2alpha: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tau4: f64,
    pub tau5: f64,
    pub tau6: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub xi: f64,
    pub mu: f64,
}

impl ConstantBundle {
    pub fn mu1(&self, alpha: f64) -> f64 {
        mu1(alpha)
    }

    pub fn mu2(&self, alpha: f64) -> f64 {
        mu2(alpha, self.ctx.rho1)
    }

    pub fn mu3(&self, alpha: f64) -> f64 {
        mu3(alpha, self.ctx.rho1)
    }

    pub fn mu4(&self, alpha: f64) -> f64 {
        mu4(alpha, self.ctx.rho1, self.ctx.beta1)
    }

    pub fn m(&self, alpha: f64) -> f64 {
        self.mu2(alpha) - mu1(alpha) * self.mu2(1.0)
    }

    pub fn c(&self, alpha: f64) -> f64 {
        self.mu3(alpha) - mu1(alpha) * self.mu2(1.0).powi(2)
    }

    pub fn d(&self, alpha: f64) -> f64 {
        self.mu4(alpha) - mu1(alpha) * self.mu4(1.0)
    }

    pub fn r(&self, alpha: f64) -> Result<f64> {
        r_const(&self.ctx, alpha)
    }

    /// Delta_alpha as a polynomial in L = log s^(-gamma) = gamma u.
    pub fn delta_alpha(&self) -> LogPolynomial {
        let SecondOrderContext { gamma1, gamma2, gamma: g, alpha, .. } = self.ctx;
        let sum = gamma1 + gamma2;
        let (t1, t2, t3, t4) = (self.tau1, self.tau2, self.tau3, self.tau4);
        LogPolynomial {
            scale: g,
            terms: vec![
                LogTerm::new(t1 * g / sum, 2.0 * alpha),
                LogTerm::new(2.0 * alpha * t1 * g * g / gamma1, 2.0 * alpha - 1.0),
                LogTerm::new(t2 * g / sum, alpha + 1.0),
                LogTerm::new(t2 * (alpha + 1.0) * g * g / gamma1, alpha),
                LogTerm::new(t3 * g / sum, 2.0),
                LogTerm::new(2.0 * t3 * g * g / gamma1, 1.0),
                LogTerm::new(t4 * g / sum, 1.0),
                LogTerm::new(t4 * g * g / gamma1, 0.0),
                LogTerm::new(-gamma1 * self.xi / sum, 0.0),
            ],
        }
    }

    /// D as a polynomial in log s = -u.
    pub fn d_poly(&self) -> LogPolynomial {
        let SecondOrderContext { gamma1, gamma2, gamma: g, .. } = self.ctx;
        let sum = gamma1 + gamma2;
        let (t5, t6) = (self.tau5, self.tau6);
        LogPolynomial {
            scale: -1.0,
            terms: vec![
                LogTerm::new(g.powi(3) * t5 / sum, 2.0),
                LogTerm::new(-2.0 * t5 * g.powi(3) / gamma1, 1.0),
                LogTerm::new(-g * g * t6 / sum, 1.0),
                LogTerm::new(t6 * g * g / gamma1, 0.0),
                LogTerm::new(-gamma1 * self.mu / sum, 0.0),
            ],
        }
    }
}

fn r_const(ctx: &SecondOrderContext, alpha: f64) -> Result<f64> {
    let q = q_alpha(ctx.rho1, ctx.gamma1, alpha)?;
    Ok(2.0 * q * ctx.gamma1.powf(2.0 - alpha) * gamma(alpha + 1.0))
}

fn nonzero(name: &str, value: f64) -> Result<f64> {
    if value == 0.0 || !value.is_finite() {
        return Err(Error::Singular(format!("{name} = {value}")));
    }
    Ok(value)
}

pub fn constants(ctx: &SecondOrderContext) -> Result<ConstantBundle> {
    let SecondOrderContext { gamma1, gamma: g, rho1: rho, alpha, .. } = *ctx;
    nonzero("gamma1", gamma1)?;
    nonzero("rho1", rho)?;
    let mut bundle = ConstantBundle {
        ctx: *ctx,
        m2: 0.0,
        r_alpha_plus_1: 0.0,
        r_2alpha: 0.0,
        tau1: 0.0,
        tau2: 0.0,
        tau3: 0.0,
        tau4: 0.0,
        tau5: (rho - 1.0) / (2.0 * gamma1 * rho),
        tau6: 1.0 + 2.0 * (1.0 - rho) / (gamma1 * rho),
        eta1: 0.0,
        eta2: 0.0,
        xi: 0.0,
        mu: g * (2.0 + 2.0 * (1.0 - rho) / (gamma1 * rho) - 1.0 / rho),
    };
    let m2 = nonzero("m_2", bundle.m(2.0))?;
    let r1 = nonzero("r_(alpha+1)", r_const(ctx, alpha + 1.0)?)?;
    let r2 = r_const(ctx, 2.0 * alpha)?;
    let k = &bundle;

    let eta1 = ((2.0 * alpha - 1.0) * k.c(2.0 * alpha) / gamma(2.0 * alpha) + k.c(2.0) * r2
        - 2.0 * k.c(alpha + 1.0) * r2 / (r1 * gamma(alpha)))
        / (2.0 * gamma1 * m2 * r1 * r1);
    let eta2 = (k.d(2.0 * alpha) / gamma(2.0 * alpha) + k.d(2.0) * r2 - 2.0 * k.d(alpha + 1.0) * r2 / (r1 * gamma(alpha + 1.0)))
        / (gamma1 * m2 * r1 * r1);
    let xi = g * ((1.0 - 2.0 * alpha - 3.0 * r2) / (r1 * r1 * m2) + 2.0 * alpha * r2 / (r1.powi(3) * m2));
    let tau1 = 1.0 / (gamma1.powf(2.0 * alpha - 1.0) * r1 * r1 * gamma(2.0 * alpha + 1.0) * m2);
    let tau2 = -2.0 * r2 / (gamma1.powf(alpha) * r1.powi(3) * gamma(alpha + 2.0) * m2);
    let tau3 = r2 / (gamma1 * r1 * r1 * 2.0 * m2);
    let tau4 = (-2.0 * alpha * r1 + 2.0 * (alpha + 1.0) * r2 - 4.0 * r1 * r2) / (r1.powi(3) * m2);

    bundle.m2 = m2;
    bundle.r_alpha_plus_1 = r1;
    bundle.r_2alpha = r2;
    bundle.tau1 = tau1;
    bundle.tau2 = tau2;
    bundle.tau3 = tau3;
    bundle.tau4 = tau4;
    bundle.eta1 = eta1;
    bundle.eta2 = eta2;
    bundle.xi = xi;
    let all = [eta1, eta2, xi, tau1, tau2, tau3, tau4, bundle.tau5, bundle.tau6, bundle.mu];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(format!("non-finite constant in {all:?}")));
    }
    Ok(bundle)
}

/// One term `coefficient * (scale u)^power` of a [`LogPolynomial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogTerm {
    pub coefficient: f64,
    pub power: f64,
}

impl LogTerm {
    pub fn new(coefficient: f64, power: f64) -> Self {
        Self { coefficient, power }
    }
}

/// f(u) = sum_j c_j (scale u)^(p_j) with u = -log s >= 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolynomial {
    pub scale: f64,
    pub terms: Vec<LogTerm>,
}

impl LogPolynomial {
    pub fn constant(c: f64) -> Self {
        Self {
            scale: 1.0,
            terms: vec![LogTerm::new(c, 0.0)],
        }
    }

    pub fn at_u(&self, u: f64) -> f64 {
        let x = self.scale * u;
        self.terms
            .iter()
            .map(|t| {
                let pow = if t.power.fract() == 0.0 && t.power.abs() < 64.0 {
                    x.powi(t.power as i32)
                } else {
                    x.powf(t.power)
                };
                t.coefficient * pow
            })
            .sum()
    }

    pub fn at_s(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("s must lie in (0, 1], got {s}")));
        }
        Ok(self.at_u(-s.ln()))
    }

    /// Every term with an integer power as coefficients of u^j, j = 0..;
    /// `None` if some power is fractional or negative.
    pub fn monomials(&self) -> Option<Vec<f64>> {
        let mut out: Vec<f64> = Vec::new();
        for t in &self.terms {
            if t.power.fract() != 0.0 || t.power < 0.0 {
                return None;
            }
            let j = t.power as usize;
            if out.len() <= j {
                out.resize(j + 1, 0.0);
            }
            out[j] += t.coefficient * self.scale.powi(j as i32);
        }
        Some(out)
    }
}

pub fn delta_alpha_fn(ctx: &SecondOrderContext, s: f64) -> Result<f64> {
    constants(ctx)?.delta_alpha().at_s(s)
}

pub fn d_fn(ctx: &SecondOrderContext, s: f64) -> Result<f64> {
    constants(ctx)?.d_poly().at_s(s)
}

/// Closed-form variance of the tail-index estimator with product-limit
/// weights.
pub fn sigma_bmn_sq(ctx: &SecondOrderContext) -> Result<f64> {
    ctx.require_regime()?;
    let r = ctx.gamma1 / ctx.gamma2;
    Ok(ctx.gamma * ctx.gamma * (1.0 + r) * (1.0 + r * r) / (1.0 - r))
}

/// Which variable of the double integral over the triangle is integrated
/// innermost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerVariable {
    /// Inner integral over the smaller of (s, t).
    Smaller,
    /// Inner integral over the larger of (s, t).
    Larger,
}

/// The three pieces of the functional variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceParts {
    pub double: f64,
    pub single: f64,
    pub value: f64,
    /// Absolute error estimate on `value`.
    pub error: f64,
}

/// Variance of `int_0^1 s^(-b-1) f(s) W(s) ds - c W(1)` for b in [0, 1/2),
/// by nested adaptive quadrature in u = -log s.
pub fn functional_variance(
    f: &LogPolynomial,
    c: f64,
    b: f64,
    rel_tol: f64,
    inner: InnerVariable,
) -> Result<VarianceParts> {
    if !(0.0..0.5).contains(&b) {
        return Err(Error::Domain(format!("exponent b must lie in [0, 1/2), got {b}")));
    }
    let q = Integrator::default();
    let kappa = 1.0 - b;
    let decay = 1.0 - 2.0 * b;
    // scale for absolute floors: the integral of |f| against the slowest weight
    let norm = q
        .integrate_to_infinity(|u| (-decay * u).exp() * f.at_u(u).abs(), 0.0, Tolerance::relative(1e-6))?
        .value
        .max(f64::MIN_POSITIVE);
    let inner_tol = Tolerance { rel: 1e-3 * rel_tol, abs: 1e-5 * rel_tol * norm };
    let outer_tol = Tolerance { rel: 0.1 * rel_tol, abs: 1e-3 * rel_tol * norm * norm };

    let single = q.integrate_to_infinity(|u| (-kappa * u).exp() * f.at_u(u), 0.0, inner_tol)?;

    let mut inner_error: f64 = 0.0;
    let mut inner_failure = None;
    let double = match inner {
        // 2 int_0^inf e^(-(1-2b)w) f(w) int_0^inf e^(-(1-b)v) f(w+v) dv dw
        InnerVariable::Smaller => q.integrate_to_infinity(
            |w| {
                let head = (-decay * w).exp() * f.at_u(w);
                if head == 0.0 {
                    return 0.0;
                }
                match q.integrate_to_infinity(|v| (-kappa * v).exp() * f.at_u(w + v), 0.0, inner_tol) {
                    Ok(est) => {
                        inner_error = inner_error.max(est.error * head.abs());
                        2.0 * head * est.value
                    }
                    Err(e) => {
                        inner_failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            outer_tol,
        )?,
        // 2 int_0^inf e^(-(1-2b)u) f(u) int_0^u e^(-b(u-w)) f(w) dw du
        InnerVariable::Larger => q.integrate_to_infinity(
            |u| {
                let head = (-decay * u).exp() * f.at_u(u);
                if head == 0.0 || u == 0.0 {
                    return 0.0;
                }
                match q.integrate(|w| (-b * (u - w)).exp() * f.at_u(w), 0.0, u, inner_tol) {
                    Ok(est) => {
                        inner_error = inner_error.max(est.error * head.abs());
                        2.0 * head * est.value
                    }
                    Err(e) => {
                        inner_failure.get_or_insert(e);
                        0.0
                    }
                }
            },
            0.0,
            outer_tol,
        )?,
    };
    if let Some(e) = inner_failure {
        return Err(e);
    }
    let value = double.value - 2.0 * c * single.value + c * c;
    // the inner errors enter the outer integral against a weight of total mass
    // at most 2 / (1 - 2b)
    let error = double.error + 2.0 * inner_error / decay + 2.0 * c.abs() * single.error;
    if !value.is_finite() || error > rel_tol * value.abs() {
        return Err(Error::Quadrature {
            requested: rel_tol,
            achieved: error / value.abs(),
        });
    }
    Ok(VarianceParts {
        double: double.value,
        single: single.value,
        value,
        error,
    })
}

/// Asymptotic variance of the bias-reduced tail-index estimator.
pub fn sigma_star_sq(ctx: &SecondOrderContext) -> Result<f64> {
    ctx.require_regime()?;
    let k = constants(ctx)?;
    Ok(functional_variance(&k.d_poly(), k.mu, ctx.b(), VARIANCE_TOLERANCE, InnerVariable::Smaller)?.value)
}

/// Asymptotic variance of the second-order parameter estimator.
pub fn sigma_alpha_sq(ctx: &SecondOrderContext) -> Result<f64> {
    ctx.require_regime()?;
    let k = constants(ctx)?;
    Ok(functional_variance(&k.delta_alpha(), k.xi, ctx.b(), VARIANCE_TOLERANCE, InnerVariable::Smaller)?.value)
}

/// Mean of the normal limit of the second-order parameter estimator.
pub fn normal_limit_bias(ctx: &SecondOrderContext, lambda1: f64, lambda2: f64) -> Result<f64> {
    let k = constants(ctx)?;
    Ok(k.eta1 * lambda1 + k.eta2 * lambda2)
}
