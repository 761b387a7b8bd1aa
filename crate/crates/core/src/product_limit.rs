//! Woodroofe's product-limit estimator under random right truncation.
//!
//! With observed pairs (X_i, Y_i), the coverage function is
//! C_n(x) = n^-1 #{i : X_i <= x <= Y_i} and the product-limit estimator of
//! the distribution of the variable of interest is
//!
//! F_n(x) = prod_{i : X_i > x} exp(-1 / (n C_n(X_i))).
//!
//! [`ProductLimitTables`] evaluates both at every X order statistic in
//! O(n log n); [`coverage`] and [`woodroofe_cdf`] are the direct pointwise
//! definitions.

use std::io::Write;

use crate::error::{Error, Result};
use crate::sampling::ObservedSample;

/// Empirical coverage C_n(x).
pub fn coverage(sample: &ObservedSample, x: f64) -> f64 {
    let hits = sample
        .pairs()
        .iter()
        .filter(|&&(xi, yi)| xi <= x && x <= yi)
        .count();
    hits as f64 / sample.n() as f64
}

/// Product-limit estimate F_n(x), evaluated directly in O(n^2).
pub fn woodroofe_cdf(sample: &ObservedSample, x: f64) -> f64 {
    let n = sample.n() as f64;
    let log_f: f64 = sample
        .pairs()
        .iter()
        .filter(|&&(xi, _)| xi > x)
        .map(|&(xi, _)| -1.0 / (n * coverage(sample, xi)))
        .sum();
    log_f.exp()
}

/// C_n, F_n and F_n / C_n at each X order statistic (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLimitTables {
    sorted_x: Vec<f64>,
    log_x: Vec<f64>,
    c_at_x: Vec<f64>,
    f_at_x: Vec<f64>,
    ratio: Vec<f64>,
    /// n C_n(X_{i:n}) as an exact count.
    cover_count: Vec<usize>,
}

impl ProductLimitTables {
    pub fn build(sample: &ObservedSample) -> Result<Self> {
        let n = sample.n();
        let pairs = sample.pairs();
        let sorted_x = sample.sorted_x();
        if let Some(w) = sorted_x.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::TiedObservations(w[0]));
        }
        let mut sorted_y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        sorted_y.sort_by(f64::total_cmp);

        // #{j : X_j <= x <= Y_j} = #{X_j <= x} - #{Y_j < x}, since Y_j < x forces X_j < x
        let cover_count: Vec<usize> = sorted_x
            .iter()
            .enumerate()
            .map(|(i, &x)| i + 1 - sorted_y.partition_point(|&y| y < x))
            .collect();

        // log F_n(X_{i:n}) = -sum_{j > i} 1 / (n C_n(X_{j:n}))
        let mut log_f = vec![0.0; n];
        for i in (0..n.saturating_sub(1)).rev() {
            log_f[i] = log_f[i + 1] - 1.0 / cover_count[i + 1] as f64;
        }
        let nf = n as f64;
        let c_at_x: Vec<f64> = cover_count.iter().map(|&c| c as f64 / nf).collect();
        let f_at_x: Vec<f64> = log_f.iter().map(|l| l.exp()).collect();
        let ratio = f_at_x.iter().zip(&c_at_x).map(|(f, c)| f / c).collect();
        let log_x = sorted_x.iter().map(|x| x.ln()).collect();
        Ok(Self {
            sorted_x,
            log_x,
            c_at_x,
            f_at_x,
            ratio,
            cover_count,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted_x.len()
    }

    pub fn sorted_x(&self) -> &[f64] {
        &self.sorted_x
    }

    pub fn log_x(&self) -> &[f64] {
        &self.log_x
    }

    pub fn c_at_x(&self) -> &[f64] {
        &self.c_at_x
    }

    pub fn f_at_x(&self) -> &[f64] {
        &self.f_at_x
    }

    pub fn ratio(&self) -> &[f64] {
        &self.ratio
    }

    pub fn cover_count(&self) -> &[usize] {
        &self.cover_count
    }

    /// Upper order statistic X_{n-i+1:n}, for i = 1..=n.
    pub fn upper(&self, i: usize) -> f64 {
        self.sorted_x[self.n() - i]
    }

    pub(crate) fn check_fraction(&self, what: &'static str, k: usize) -> Result<()> {
        let hi = self.n().saturating_sub(1);
        if k < 1 || k > hi {
            return Err(Error::Range { what, value: k, lo: 1, hi });
        }
        Ok(())
    }

    /// n^-1 sum_{i=1}^{upsilon} F_n(X_{n-i+1:n}) / C_n(X_{n-i+1:n}), the
    /// ratio-sum form of the tail mass above X_{n-upsilon:n}.
    ///
    /// This is a first-order expansion of the exact tail mass
    /// [`Self::tail_mass`]: each jump of F_n equals
    /// F_n(X_j) (1 - exp(-1/(n C_n(X_j)))) rather than F_n(X_j)/(n C_n(X_j)).
    pub fn tail_mass_ratio_sum(&self, upsilon: usize) -> Result<f64> {
        self.check_fraction("upsilon", upsilon)?;
        let n = self.n();
        let sum: f64 = self.ratio[n - upsilon..].iter().sum();
        Ok(sum / n as f64)
    }

    /// 1 - F_n(X_{n-upsilon:n}).
    pub fn tail_mass(&self, upsilon: usize) -> Result<f64> {
        self.check_fraction("upsilon", upsilon)?;
        let n = self.n();
        let log_f = self.f_at_x[n - upsilon - 1].ln();
        Ok(-log_f.exp_m1())
    }

    /// Sum of the exact product-limit jumps at the top `upsilon` order
    /// statistics; telescopes to [`Self::tail_mass`].
    pub fn tail_mass_jump_sum(&self, upsilon: usize) -> Result<f64> {
        self.check_fraction("upsilon", upsilon)?;
        let n = self.n();
        Ok((n - upsilon..n)
            .map(|j| -self.f_at_x[j] * (-1.0 / self.cover_count[j] as f64).exp_m1())
            .sum())
    }

    /// Debug dump as `i,x,c,f,ratio` CSV (i is the 1-based ascending rank).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "i,x,c,f,ratio")?;
        for i in 0..self.n() {
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                self.sorted_x[i],
                self.c_at_x[i],
                self.f_at_x[i],
                self.ratio[i]
            )?;
        }
        Ok(())
    }
}

/// Normalized weights a_n^(i), i = 1..=k, attached to X_{n-i+1:n}.
pub fn bmn_weights(tables: &ProductLimitTables, k: usize) -> Result<Vec<f64>> {
    tables.check_fraction("k", k)?;
    let n = tables.n();
    let top: Vec<f64> = (1..=k).map(|i| tables.ratio[n - i]).collect();
    let total: f64 = top.iter().sum();
    let mut weights: Vec<f64> = top.iter().map(|r| r / total).collect();
    let head: f64 = weights[..k - 1].iter().sum();
    weights[k - 1] = 1.0 - head;
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::E;

    fn sample(pairs: &[(f64, f64)]) -> ObservedSample {
        ObservedSample::new(pairs.to_vec()).unwrap()
    }

    #[test]
    fn coverage_examples() {
        let s = sample(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(coverage(&s, 1.0), 0.5);
        assert_eq!(coverage(&s, 2.5), 0.0);
        for &(x, _) in s.pairs() {
            assert!(coverage(&s, x) >= 0.5);
        }
    }

    #[test]
    fn cdf_examples() {
        let s = sample(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_relative_eq!(woodroofe_cdf(&s, 2.0), (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(woodroofe_cdf(&s, 5.0), 1.0);
        let single = sample(&[(1.0, 2.0)]);
        assert_relative_eq!(woodroofe_cdf(&single, 0.5), 1.0 / E, max_relative = 1e-15);
    }

    #[test]
    fn tables_two_pairs() {
        let t = ProductLimitTables::build(&sample(&[(3.0, 4.0), (1.0, 2.0)])).unwrap();
        assert_eq!(t.sorted_x(), &[1.0, 3.0]);
        assert_eq!(t.c_at_x(), &[0.5, 0.5]);
        assert_relative_eq!(t.f_at_x()[0], (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(t.f_at_x()[1], 1.0);

        let one = ProductLimitTables::build(&sample(&[(2.0, 3.0)])).unwrap();
        assert_eq!(one.c_at_x(), &[1.0]);
        assert_eq!(one.f_at_x(), &[1.0]);
    }

    #[test]
    fn weights_three_pairs() {
        // C_n: X=1 -> {1}, X=3 -> {3}, X=5 -> {5}: each 1/3
        // F_n(5) = 1, F_n(3) = e^-1, ratios 3 and 3/e
        let t = ProductLimitTables::build(&sample(&[(1.0, 2.0), (3.0, 4.0), (5.0, 9.0)])).unwrap();
        let w = bmn_weights(&t, 2).unwrap();
        let (r5, r3) = (3.0, 3.0 / E);
        assert_relative_eq!(w[0], r5 / (r5 + r3), max_relative = 1e-15);
        assert_relative_eq!(w[1], r3 / (r5 + r3), max_relative = 1e-15);
        assert_eq!(bmn_weights(&t, 1).unwrap(), vec![1.0]);
        assert!(matches!(bmn_weights(&t, 0), Err(Error::Range { .. })));
        assert!(matches!(bmn_weights(&t, 3), Err(Error::Range { .. })));
    }

    #[test]
    fn dump_has_header_and_rows() {
        let t = ProductLimitTables::build(&sample(&[(1.0, 2.0), (3.0, 4.0)])).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,x,c,f,ratio\n1,1,0.5,"));
        assert_eq!(text.lines().count(), 3);
    }
}
