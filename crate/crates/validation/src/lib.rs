//! Reference computations that do not share code with the estimators:
//! closed-form variances for polynomial integrands and a Brownian-path
//! simulation of the same functionals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use trunctail::asymptotics::LogPolynomial;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact variance for f(u) = sum_j a_j u^j, using
/// int_w^inf e^(-k u) u^j du = e^(-k w) sum_{i<=j} j!/i! w^i / k^(j-i+1).
pub fn exact_variance(a: &[f64], c: f64, b: f64) -> f64 {
    let kappa = 1.0 - b;
    let decay = 1.0 - 2.0 * b;
    let single: f64 = a
        .iter()
        .enumerate()
        .map(|(j, aj)| aj * factorial(j) / kappa.powi(j as i32 + 1))
        .sum();
    let mut double = 0.0;
    for (m, am) in a.iter().enumerate() {
        for (j, aj) in a.iter().enumerate() {
            for i in 0..=j {
                let inner = factorial(j) / factorial(i) / kappa.powi((j - i + 1) as i32);
                let outer = factorial(m + i) / decay.powi((m + i + 1) as i32);
                double += 2.0 * am * aj * inner * outer;
            }
        }
    }
    double - 2.0 * c * single + c * c
}

/// Sample variance of `int_0^1 s^(-b-1) f(s) W(s) ds - c W(1)` over
/// simulated Brownian paths, with its standard error.
///
/// The path lives on a grid that is uniform with step `h` on [0.01, 1] and
/// uniform in log s below 0.01 (down to s = e^-120, where the integrand's
/// contribution is far below double precision); the integral is the
/// trapezoid rule on that grid.
pub fn brownian_variance(f: &LogPolynomial, c: f64, b: f64, paths: usize, h: f64, seed: u64) -> (f64, f64) {
    let mut grid: Vec<f64> = Vec::new();
    let (u_max, du) = (120.0, 0.01);
    let mut u = u_max;
    while u > -(0.01f64).ln() {
        grid.push((-u).exp());
        u -= du;
    }
    let mut s = 0.01;
    while s < 1.0 - 0.5 * h {
        grid.push(s);
        s += h;
    }
    grid.push(1.0);
    let g: Vec<f64> = grid.iter().map(|&s| s.powf(-b - 1.0) * f.at_s(s).unwrap()).collect();
    // trapezoid weights
    let mut w = vec![0.0; grid.len()];
    for j in 0..grid.len() - 1 {
        let half = 0.5 * (grid[j + 1] - grid[j]);
        w[j] += half * g[j];
        w[j + 1] += half * g[j + 1];
    }
    let sd: Vec<f64> = std::iter::once(grid[0].sqrt())
        .chain(grid.windows(2).map(|p| (p[1] - p[0]).sqrt()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..paths)
        .map(|_| {
            let mut wt = 0.0;
            let mut total = 0.0;
            for j in 0..grid.len() {
                let z: f64 = StandardNormal.sample(&mut rng);
                wt += sd[j] * z;
                total += w[j] * wt;
            }
            total - c * wt
        })
        .collect();
    let n = paths as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    // standard error of a sample variance: sqrt((m4 - var^2) / n)
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    (var, ((m4 - var * var) / n).sqrt())
}


#[cfg(test)]
mod tests {
    use super::*;
    use trunctail::asymptotics::{
        constants, functional_variance, sigma_alpha_sq, sigma_star_sq, InnerVariable, SecondOrderContext,
        VARIANCE_TOLERANCE,
    };
    use trunctail::sampling::TruncationModel;

    fn grid_contexts(alpha: f64) -> Vec<SecondOrderContext> {
        let mut out = Vec::new();
        for g1 in [0.6, 0.8] {
            for p in [0.7, 0.9] {
                let m = TruncationModel::burr_with_p(g1, p, 0.25).unwrap();
                out.push(SecondOrderContext::from_model(&m, alpha).unwrap());
            }
        }
        out.push(SecondOrderContext::new(0.6, 1.4, -2.4, -2.4, alpha).unwrap());
        out.push(SecondOrderContext::new(0.5, 3.0, -0.7, -1.3, alpha).unwrap());
        out
    }

    #[test]
    fn quadrature_matches_exact_polynomial_integrals() {
        for alpha in [2.0, 3.0] {
            for ctx in grid_contexts(alpha) {
                let k = constants(&ctx).unwrap();
                let star = sigma_star_sq(&ctx).unwrap();
                let exact_star = exact_variance(&k.d_poly().monomials().unwrap(), k.mu, ctx.b());
                assert!(
                    (star - exact_star).abs() <= 1e-8 * exact_star.abs(),
                    "{ctx:?}: {star} vs {exact_star}"
                );
                let sa = sigma_alpha_sq(&ctx).unwrap();
                let exact_alpha = exact_variance(&k.delta_alpha().monomials().unwrap(), k.xi, ctx.b());
                assert!(
                    (sa - exact_alpha).abs() <= 1e-8 * exact_alpha.abs(),
                    "{ctx:?}: {sa} vs {exact_alpha}"
                );
                assert!(star >= 0.0 && sa >= 0.0);
            }
        }
    }

    #[test]
    fn fractional_alpha_is_finite_and_nonnegative() {
        for ctx in grid_contexts(1.5) {
            let v = sigma_alpha_sq(&ctx).unwrap();
            assert!(v.is_finite() && v >= 0.0, "{ctx:?}: {v}");
        }
    }

    #[test]
    fn integration_order_is_irrelevant() {
        for ctx in grid_contexts(2.0) {
            let k = constants(&ctx).unwrap();
            for (f, c) in [(k.d_poly(), k.mu), (k.delta_alpha(), k.xi)] {
                let a = functional_variance(&f, c, ctx.b(), 1e-11, InnerVariable::Smaller).unwrap();
                let b = functional_variance(&f, c, ctx.b(), 1e-11, InnerVariable::Larger).unwrap();
                assert!(
                    (a.double - b.double).abs() <= 1e-10 * a.double.abs(),
                    "{} vs {}",
                    a.double,
                    b.double
                );
            }
        }
    }

    #[test]
    fn halving_the_tolerance_is_stable() {
        for ctx in grid_contexts(2.0) {
            let k = constants(&ctx).unwrap();
            for (f, c) in [(k.d_poly(), k.mu), (k.delta_alpha(), k.xi)] {
                let a = functional_variance(&f, c, ctx.b(), VARIANCE_TOLERANCE, InnerVariable::Smaller).unwrap();
                let b = functional_variance(&f, c, ctx.b(), VARIANCE_TOLERANCE / 2.0, InnerVariable::Smaller).unwrap();
                assert!((a.value - b.value).abs() <= VARIANCE_TOLERANCE * a.value.abs());
            }
        }
    }

    #[test]
    fn brownian_paths_agree_with_quadrature() {
        let ctxs = [
            SecondOrderContext::new(0.6, 5.4, -2.4, -2.4, 2.0).unwrap(),
            SecondOrderContext::new(0.6, 1.4, -2.4, -2.4, 2.0).unwrap(),
        ];
        for (i, ctx) in ctxs.iter().enumerate() {
            let k = constants(ctx).unwrap();
            for (j, (f, c, exact)) in [
                (k.d_poly(), k.mu, sigma_star_sq(ctx).unwrap()),
                (k.delta_alpha(), k.xi, sigma_alpha_sq(ctx).unwrap()),
            ]
            .into_iter()
            .enumerate()
            {
                let (var, se) = brownian_variance(&f, c, ctx.b(), 2000, 1e-4, 1000 + 10 * i as u64 + j as u64);
                assert!(
                    (var - exact).abs() <= 3.0 * se,
                    "{ctx:?} functional {j}: simulated {var} +- {se}, quadrature {exact}"
                );
            }
        }
    }
}
