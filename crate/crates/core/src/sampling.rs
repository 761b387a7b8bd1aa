//! Burr-by-Burr random right truncation: model parameterization, inversion
//! sampling and the `x,y` CSV sample format.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Generative model: X ~ Burr(gamma1, delta) truncated to the right by an
/// independent Y ~ Burr(gamma2, delta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationModel {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    /// P(X <= Y) = gamma2 / (gamma1 + gamma2).
    pub p: f64,
    /// Tail index of the observed X, gamma1 gamma2 / (gamma1 + gamma2).
    pub gamma: f64,
    pub rho1: f64,
    pub beta1: f64,
}

impl TruncationModel {
    pub fn burr(gamma1: f64, gamma2: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("gamma1", gamma1), ("gamma2", gamma2), ("delta", delta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let rho1 = -gamma1 / delta;
        Ok(Self {
            gamma1,
            gamma2,
            delta,
            p: gamma2 / (gamma1 + gamma2),
            gamma: gamma1 * gamma2 / (gamma1 + gamma2),
            rho1,
            beta1: rho1,
        })
    }

    /// Model with the truncation index chosen so that a fraction `p` of the
    /// latent pairs is observed.
    pub fn burr_with_p(gamma1: f64, p: f64, delta: f64) -> Result<Self> {
        let gamma2 = solve_gamma2(gamma1, p)?;
        let mut model = Self::burr(gamma1, gamma2, delta)?;
        model.p = p;
        Ok(model)
    }

    /// The asymptotic results assume the variable of interest is lighter
    /// tailed than the truncation variable.
    pub fn in_theory_regime(&self) -> bool {
        self.gamma1 < self.gamma2
    }
}

/// Inverts p = gamma2 / (gamma1 + gamma2) for gamma2.
pub fn solve_gamma2(gamma1: f64, p: f64) -> Result<f64> {
    if !(gamma1.is_finite() && gamma1 > 0.0) {
        return Err(Error::Domain(format!("gamma1 must be positive, got {gamma1}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must lie in (0, 1), got {p}")));
    }
    Ok(p * gamma1 / (1.0 - p))
}

/// Quantile of the Burr law with survival (1 + x^(1/delta))^(-delta/gamma).
///
/// Evaluated in log space so that u close to 1 does not overflow for heavy
/// truncation tails.
pub fn burr_quantile(u: f64, gamma: f64, delta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("u must lie in [0, 1), got {u}")));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    // t = -(gamma/delta) ln(1-u) > 0, x = (e^t - 1)^delta
    let t = -(gamma / delta) * (-u).ln_1p();
    let log_expm1 = if t > 30.0 {
        t + (-(-t).exp()).ln_1p()
    } else {
        t.exp_m1().ln()
    };
    Ok((delta * log_expm1).exp())
}

/// Survival function (1 + x^(1/delta))^(-delta/gamma) of the Burr law.
pub fn burr_survival(x: f64, gamma: f64, delta: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let z = x.ln() / delta;
    // softplus(z) = ln(1 + e^z)
    let softplus = if z > 30.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    (-(delta / gamma) * softplus).exp()
}

/// Deterministic generator for replicate `replicate` of stream `stream`.
///
/// The seed of each replicate is `seed ^ replicate`; distinct Monte-Carlo
/// cells use distinct ChaCha streams.
pub fn replicate_rng(seed: u64, replicate: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ replicate);
    rng.set_stream(stream);
    rng
}

/// Observed pairs (x, y) with x <= y, together with the permutation that
/// sorts x ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    pairs: Vec<(f64, f64)>,
    sorted_x_idx: Vec<usize>,
}

impl ObservedSample {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        for (index, &(x, y)) in pairs.iter().enumerate() {
            if !(x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0) {
                return Err(Error::Domain(format!(
                    "pair {index} must be positive and finite, got ({x}, {y})"
                )));
            }
            if x > y {
                return Err(Error::NotTruncated { index, x, y });
            }
        }
        let mut sorted_x_idx: Vec<usize> = (0..pairs.len()).collect();
        sorted_x_idx.sort_by(|&a, &b| pairs[a].0.total_cmp(&pairs[b].0));
        if let Some(w) = sorted_x_idx
            .windows(2)
            .find(|w| pairs[w[0]].0 == pairs[w[1]].0)
        {
            return Err(Error::TiedObservations(pairs[w[0]].0));
        }
        Ok(Self { pairs, sorted_x_idx })
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn sorted_x_idx(&self) -> &[usize] {
        &self.sorted_x_idx
    }

    /// X order statistics X_{1:n} < ... < X_{n:n}.
    pub fn sorted_x(&self) -> Vec<f64> {
        self.sorted_x_idx.iter().map(|&i| self.pairs[i].0).collect()
    }

    /// Same pairs multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.pairs.iter().map(|&(x, y)| (c * x, c * y)).collect())
    }

    /// Writes the sample as `x,y` CSV. Rust's shortest round-trip float
    /// formatting keeps the file lossless.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y")?;
        for &(x, y) in &self.pairs {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }

    /// Reads `x,y` CSV. The header is optional; errors carry the 1-based
    /// line number of the offending row.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut pairs = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                row: i + 1,
                message: e.to_string(),
            })?;
            let row = record.position().map_or(i + 1, |p| p.line() as usize);
            if record.len() != 2 {
                return Err(Error::Parse {
                    row,
                    message: format!("expected 2 fields, found {}", record.len()),
                });
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            let (x, y) = match parsed {
                (Ok(x), Ok(y)) => (x, y),
                _ if pairs.is_empty() && i == 0 => continue, // header row
                _ => {
                    return Err(Error::Parse {
                        row,
                        message: format!("cannot parse '{}','{}' as numbers", &record[0], &record[1]),
                    })
                }
            };
            if !(x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0) {
                return Err(Error::Parse {
                    row,
                    message: format!("values must be positive and finite, got ({x}, {y})"),
                });
            }
            if x > y {
                return Err(Error::Parse {
                    row,
                    message: format!("x = {x} exceeds y = {y}; truncated pairs require x <= y"),
                });
            }
            pairs.push((x, y));
        }
        if pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        Self::new(pairs).map_err(|e| match e {
            Error::TiedObservations(v) => Error::Parse {
                row: 0,
                message: format!("tied x values ({v}); continuous data expected"),
            },
            other => other,
        })
    }
}

/// Draws `n_pairs` latent pairs by inversion and keeps those with x <= y.
pub fn draw_truncated_sample(model: &TruncationModel, n_pairs: usize, seed: u64) -> Result<ObservedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_truncated_sample_with(model, n_pairs, &mut rng)
}

pub fn draw_truncated_sample_with<R: Rng>(
    model: &TruncationModel,
    n_pairs: usize,
    rng: &mut R,
) -> Result<ObservedSample> {
    if n_pairs == 0 {
        return Err(Error::Domain("the number of latent pairs must be at least 1".into()));
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    let mut seen = HashSet::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        loop {
            let x = burr_quantile(rng.random::<f64>(), model.gamma1, model.delta)?;
            let y = burr_quantile(rng.random::<f64>(), model.gamma2, model.delta)?;
            let valid = x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
            if !valid {
                continue;
            }
            if x <= y {
                // colliding x values are redrawn: the model is continuous
                if !seen.insert(x.to_bits()) {
                    continue;
                }
                pairs.push((x, y));
            }
            break;
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    ObservedSample::new(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma2_inversion() {
        assert_relative_eq!(solve_gamma2(0.6, 0.7).unwrap(), 1.4, max_relative = 1e-14);
        assert_relative_eq!(solve_gamma2(0.6, 0.9).unwrap(), 5.4, max_relative = 1e-14);
        assert_eq!(solve_gamma2(1.0, 0.5).unwrap(), 1.0);
        let g2 = solve_gamma2(0.6, 0.7).unwrap();
        assert_relative_eq!(g2 / (0.6 + g2), 0.7, max_relative = 1e-15);
        assert!(solve_gamma2(0.6, 1.0).is_err());
        assert!(solve_gamma2(0.6, 0.0).is_err());
        assert!(solve_gamma2(-0.1, 0.5).is_err());
    }

    #[test]
    fn model_invariants() {
        let m = TruncationModel::burr_with_p(0.6, 0.9, 0.25).unwrap();
        assert_relative_eq!(m.p, m.gamma2 / (m.gamma1 + m.gamma2), max_relative = 1e-12);
        assert_relative_eq!(m.gamma, 0.54, max_relative = 1e-12);
        assert_relative_eq!(m.rho1, -2.4, max_relative = 1e-15);
        assert_eq!(m.rho1, m.beta1);
        assert!(m.in_theory_regime());
        let flipped = TruncationModel::burr(2.0, 1.0, 0.25).unwrap();
        assert!(!flipped.in_theory_regime());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(burr_quantile(0.0, 0.6, 0.25).unwrap(), 0.0);
        assert_relative_eq!(burr_quantile(0.5, 1.0, 1.0).unwrap(), 1.0, max_relative = 1e-14);
        let v = burr_quantile(0.99, 0.6, 0.25).unwrap();
        assert_relative_eq!((1.0 + v.powi(4)).powf(-0.25 / 0.6), 0.01, max_relative = 1e-10);
        assert!(burr_quantile(1.0, 0.6, 0.25).is_err());
        assert!(burr_quantile(-0.1, 0.6, 0.25).is_err());
    }

    #[test]
    fn quantile_round_trip_grid() {
        for &(g, d) in &[(0.6, 0.25), (5.4, 0.25), (1.0, 1.0), (0.8, 2.0)] {
            let mut last = -1.0;
            for j in 0..=1000 {
                let u = (1.0 - 1e-9) * j as f64 / 1000.0;
                let x = burr_quantile(u, g, d).unwrap();
                assert!(x.is_finite() && x > last);
                last = x;
                let back = burr_survival(x, g, d);
                assert!((back - (1.0 - u)).abs() <= 1e-10, "u={u} g={g}: {back}");
            }
        }
    }

    #[test]
    fn single_pair_draw() {
        let m = TruncationModel::burr_with_p(0.6, 0.7, 0.25).unwrap();
        for seed in 0..50 {
            match draw_truncated_sample(&m, 1, seed) {
                Ok(s) => {
                    assert_eq!(s.n(), 1);
                    assert!(s.pairs()[0].0 <= s.pairs()[0].1);
                }
                Err(e) => assert_eq!(e, Error::EmptySample),
            }
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let m = TruncationModel::burr_with_p(0.6, 0.7, 0.25).unwrap();
        let a = draw_truncated_sample(&m, 500, 42).unwrap();
        let b = draw_truncated_sample(&m, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = draw_truncated_sample(&m, 500, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kept_fraction_n1000() {
        // n ~ Binomial(1000, 0.7): sd = 14.5, so +-50 is beyond 3.4 sd
        let m = TruncationModel::burr_with_p(0.6, 0.7, 0.25).unwrap();
        let s = draw_truncated_sample(&m, 1000, 7).unwrap();
        let frac = s.n() as f64 / 1000.0;
        assert!((frac - 0.7).abs() <= 0.05, "{frac}");
    }

    #[test]
    fn rejects_bad_pairs() {
        assert_eq!(ObservedSample::new(vec![]), Err(Error::EmptySample));
        assert!(matches!(
            ObservedSample::new(vec![(3.0, 2.0)]),
            Err(Error::NotTruncated { index: 0, .. })
        ));
        assert!(matches!(
            ObservedSample::new(vec![(1.0, 2.0), (1.0, 3.0)]),
            Err(Error::TiedObservations(_))
        ));
        assert!(ObservedSample::new(vec![(0.0, 2.0)]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = TruncationModel::burr_with_p(0.8, 0.9, 0.25).unwrap();
        let s = draw_truncated_sample(&m, 200, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = ObservedSample::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);

        let headerless = ObservedSample::read_csv("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(headerless.n(), 2);

        let err = ObservedSample::read_csv("x,y\n1,2\n3,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err:?}");
        let err = ObservedSample::read_csv("x,y\n1,2\nfoo,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err:?}");
    }
}
