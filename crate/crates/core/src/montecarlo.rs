//! Seeded Monte-Carlo study of the estimators on Burr truncation models.
//!
//! Every (gamma1, p, N) cell draws `replicates` independent truncated
//! samples, runs the estimation pipeline on each and aggregates absolute
//! bias and rmse. Replicate r of a cell uses seed `seed ^ r` on a ChaCha
//! stream derived from the cell's parameters, so a cell gives the same
//! numbers whether it runs alone or inside a grid, on any number of threads.

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{full_pipeline, KChoice, PipelineConfig, RhoEstimate, FALLBACK_RHO};
use crate::sampling::{draw_truncated_sample_with, replicate_rng, TruncationModel};
use crate::selection::SelectionConfig;

/// How the bias column is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbiasMode {
    /// |mean(estimate) - truth|.
    #[default]
    AbsoluteMean,
    /// mean(|estimate - truth|).
    MeanAbsolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub gamma1_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub n_list: Vec<usize>,
    pub replicates: usize,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub selection: SelectionConfig,
    pub fallback_rho: f64,
    pub abias: AbiasMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            gamma1_list: vec![0.6, 0.8],
            p_list: vec![0.7, 0.9],
            n_list: vec![100, 200, 500, 1000],
            replicates: 1000,
            delta: 0.25,
            alpha: 2.0,
            seed: 1,
            selection: SelectionConfig::default(),
            fallback_rho: FALLBACK_RHO,
            abias: AbiasMode::AbsoluteMean,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Domain("replicates must be at least 1".into()));
        }
        if self.gamma1_list.iter().chain(&self.p_list).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain("grid values must be positive and finite".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 20) {
            return Err(Error::Range { what: "N", value: n, lo: 20, hi: usize::MAX });
        }
        self.selection.validate()
    }

    fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k: KChoice::Auto,
            alpha: self.alpha,
            fallback_rho: self.fallback_rho,
            selection: self.selection,
        }
    }
}

/// One replicate's estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub n: usize,
    pub k_star: usize,
    pub k_bmn: usize,
    pub upsilon: usize,
    pub rho1_hat: RhoEstimate,
    pub gamma1_hat: f64,
    pub gamma_bmn: f64,
}

/// Aggregates for one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub gamma1: f64,
    pub p: f64,
    pub big_n: usize,
    pub gamma2: f64,
    pub rho1: f64,
    pub replicates: usize,
    pub mean_n: f64,
    /// Mean fraction chosen for the bias-reduced estimator.
    pub mean_k_star: f64,
    /// Mean fraction chosen for the weighted Hill-type estimator.
    pub mean_k_bmn: f64,
    pub mean_upsilon_star: f64,
    /// Over replicates with an admissible statistic only.
    pub abias_rho: f64,
    pub rmse_rho: f64,
    pub abias_gamma_reduced: f64,
    pub rmse_gamma_reduced: f64,
    pub abias_gamma_bmn: f64,
    pub rmse_gamma_bmn: f64,
    pub not_admissible_count: usize,
    pub failure_count: usize,
    /// First replicate error, if any.
    pub first_failure: Option<Error>,
}

impl McCell {
    /// More than half of the replicates failed.
    pub fn failed(&self) -> bool {
        2 * self.failure_count > self.replicates
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McReport {
    pub cells: Vec<McCell>,
}

/// Stream index for a cell, mixed from its parameters (splitmix64 finalizer).
fn cell_stream(gamma1: f64, p: f64, big_n: usize) -> u64 {
    let mut z = gamma1.to_bits() ^ p.to_bits().rotate_left(21) ^ (big_n as u64).rotate_left(42);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One replicate of a cell.
pub fn run_replicate(model: &TruncationModel, big_n: usize, cfg: &McConfig, replicate: u64) -> Result<ReplicateOutcome> {
    let stream = cell_stream(model.gamma1, model.p, big_n);
    let mut rng = replicate_rng(cfg.seed, replicate, stream);
    let sample = draw_truncated_sample_with(model, big_n, &mut rng)?;
    let est = full_pipeline(&sample, &cfg.pipeline())?;
    Ok(ReplicateOutcome {
        n: sample.n(),
        k_star: est.k_used,
        k_bmn: est.k_bmn,
        upsilon: est.upsilon_used,
        rho1_hat: est.rho1_hat,
        gamma1_hat: est.gamma1_hat,
        gamma_bmn: est.gamma_bmn,
    })
}

/// (abias, rmse) of `values` around `truth`; NaN for an empty slice.
fn bias_rmse(values: &[f64], truth: f64, mode: AbiasMode) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = values.len() as f64;
    let abias = match mode {
        AbiasMode::AbsoluteMean => (values.iter().sum::<f64>() / m - truth).abs(),
        AbiasMode::MeanAbsolute => values.iter().map(|v| (v - truth).abs()).sum::<f64>() / m,
    };
    let rmse = (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / m).sqrt();
    (abias, rmse)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

pub fn run_cell(gamma1: f64, p: f64, big_n: usize, cfg: &McConfig) -> Result<McCell> {
    cfg.validate()?;
    if big_n < 20 {
        return Err(Error::Range { what: "N", value: big_n, lo: 20, hi: usize::MAX });
    }
    let model = TruncationModel::burr_with_p(gamma1, p, cfg.delta)?;
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| run_replicate(&model, big_n, cfg, r))
        .collect();
    Ok(aggregate(&model, big_n, cfg, &outcomes))
}

fn aggregate(model: &TruncationModel, big_n: usize, cfg: &McConfig, outcomes: &[Result<ReplicateOutcome>]) -> McCell {
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let first_failure = outcomes.iter().find_map(|o| o.as_ref().err().cloned());
    let rho: Vec<f64> = ok.iter().filter_map(|o| o.rho1_hat.value()).collect();
    let reduced: Vec<f64> = ok.iter().map(|o| o.gamma1_hat).collect();
    let bmn: Vec<f64> = ok.iter().map(|o| o.gamma_bmn).collect();
    let (abias_rho, rmse_rho) = bias_rmse(&rho, model.rho1, cfg.abias);
    let (abias_gamma_reduced, rmse_gamma_reduced) = bias_rmse(&reduced, model.gamma1, cfg.abias);
    let (abias_gamma_bmn, rmse_gamma_bmn) = bias_rmse(&bmn, model.gamma1, cfg.abias);
    McCell {
        gamma1: model.gamma1,
        p: model.p,
        big_n,
        gamma2: model.gamma2,
        rho1: model.rho1,
        replicates: outcomes.len(),
        mean_n: mean(ok.iter().map(|o| o.n as f64)),
        mean_k_star: mean(ok.iter().map(|o| o.k_star as f64)),
        mean_k_bmn: mean(ok.iter().map(|o| o.k_bmn as f64)),
        mean_upsilon_star: mean(ok.iter().map(|o| o.upsilon as f64)),
        abias_rho,
        rmse_rho,
        abias_gamma_reduced,
        rmse_gamma_reduced,
        abias_gamma_bmn,
        rmse_gamma_bmn,
        not_admissible_count: ok.len() - rho.len(),
        failure_count: outcomes.len() - ok.len(),
        first_failure,
    }
}

/// Runs every (gamma1, p, N) cell, in that nesting order.
pub fn run_grid(cfg: &McConfig) -> Result<McReport> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &gamma1 in &cfg.gamma1_list {
        for &p in &cfg.p_list {
            for &big_n in &cfg.n_list {
                cells.push(run_cell(gamma1, p, big_n, cfg)?);
            }
        }
    }
    Ok(McReport { cells })
}

pub const CSV_HEADER: &str =
    "gamma1,p,N,meanN,kstar,upsilonstar,abias_rho,rmse_rho,abias_g1,rmse_g1,abias_bmn,rmse_bmn,notadmissible,failures";

impl McReport {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &McCell> {
        self.cells.iter().filter(|c| c.failed())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| Error::Io(e.to_string()))?;
        for c in &self.cells {
            let row = [
                c.gamma1.to_string(),
                c.p.to_string(),
                c.big_n.to_string(),
                format!("{:.3}", c.mean_n),
                format!("{:.3}", c.mean_k_star),
                format!("{:.3}", c.mean_upsilon_star),
                format!("{:.6}", c.abias_rho),
                format!("{:.6}", c.rmse_rho),
                format!("{:.6}", c.abias_gamma_reduced),
                format!("{:.6}", c.rmse_gamma_reduced),
                format!("{:.6}", c.abias_gamma_bmn),
                format!("{:.6}", c.rmse_gamma_bmn),
                c.not_admissible_count.to_string(),
                c.failure_count.to_string(),
            ];
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text rendering: one block for the second-order parameter and
    /// one for the two tail-index estimators.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "second-order parameter rho1 (alpha-statistic at upsilon = u_n)");
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>6} {:>9} {:>9} {:>9} {:>9} {:>7} {:>6}",
            "gamma1", "p", "N", "n", "upsilon", "abias", "rmse", "notadm", "fail"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:>6} {:>5} {:>6} {:>9.1} {:>9.1} {:>9.4} {:>9.4} {:>7} {:>6}",
                c.gamma1, c.p, c.big_n, c.mean_n, c.mean_upsilon_star, c.abias_rho, c.rmse_rho,
                c.not_admissible_count, c.failure_count
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "tail index gamma1: bias-reduced (g1) and product-limit weighted (bmn)");
        let _ = writeln!(
            s,
            "{:>6} {:>5} {:>6} {:>9} {:>8} {:>9} {:>9} {:>8} {:>9} {:>9}",
            "gamma1", "p", "N", "n", "k_g1", "abias_g1", "rmse_g1", "k_bmn", "abias_bmn", "rmse_bmn"
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{:>6} {:>5} {:>6} {:>9.1} {:>8.1} {:>9.4} {:>9.4} {:>8.1} {:>9.4} {:>9.4}",
                c.gamma1, c.p, c.big_n, c.mean_n, c.mean_k_star, c.abias_gamma_reduced,
                c.rmse_gamma_reduced, c.mean_k_bmn, c.abias_gamma_bmn, c.rmse_gamma_bmn
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(replicates: usize) -> McConfig {
        McConfig {
            gamma1_list: vec![0.6],
            p_list: vec![0.9],
            n_list: vec![200],
            replicates,
            ..Default::default()
        }
    }

    #[test]
    fn bias_and_rmse() {
        let (b, r) = bias_rmse(&[1.0, 3.0], 1.0, AbiasMode::AbsoluteMean);
        assert_eq!(b, 1.0);
        assert_eq!(r, 2.0f64.sqrt());
        let (b, _) = bias_rmse(&[0.0, 2.0], 1.0, AbiasMode::AbsoluteMean);
        assert_eq!(b, 0.0);
        let (b, _) = bias_rmse(&[0.0, 2.0], 1.0, AbiasMode::MeanAbsolute);
        assert_eq!(b, 1.0);
        assert!(bias_rmse(&[], 1.0, AbiasMode::AbsoluteMean).0.is_nan());
    }

    #[test]
    fn single_replicate_is_deterministic() {
        let cfg = small(1);
        let a = run_cell(0.6, 0.9, 200, &cfg).unwrap();
        let b = run_cell(0.6, 0.9, 200, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.replicates, 1);
        assert!(a.mean_n > 0.0 && a.mean_n <= 200.0);
        let other = run_cell(0.6, 0.9, 200, &McConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(a.mean_n, other.mean_n);
    }

    #[test]
    fn grid_cells_match_standalone_cells() {
        let cfg = McConfig {
            gamma1_list: vec![0.6, 0.8],
            p_list: vec![0.9],
            n_list: vec![100, 200],
            replicates: 8,
            ..Default::default()
        };
        let report = run_grid(&cfg).unwrap();
        assert_eq!(report.cells.len(), 4);
        assert_eq!(report.cells[3], run_cell(0.8, 0.9, 200, &cfg).unwrap());
        for c in &report.cells {
            assert!(c.rmse_gamma_bmn >= c.abias_gamma_bmn);
            assert!(c.rmse_gamma_reduced >= c.abias_gamma_reduced);
            assert!(c.not_admissible_count + c.failure_count <= c.replicates);
        }
    }

    #[test]
    fn empty_grid_and_csv_shape() {
        let empty = run_grid(&McConfig { n_list: vec![], ..small(1) }).unwrap();
        assert!(empty.is_empty());
        let mut buf = Vec::new();
        empty.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));

        let report = run_grid(&small(3)).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("0.6,0.9,200,"));
        assert!(report.to_table().contains("abias_bmn"));
    }

    #[test]
    fn invalid_configs() {
        assert!(run_grid(&McConfig { replicates: 0, ..small(1) }).is_err());
        assert!(run_cell(0.6, 0.9, 10, &small(1)).is_err());
        assert!(run_cell(0.6, 1.2, 100, &small(1)).is_err());
    }

    #[test]
    fn failure_threshold() {
        let model = TruncationModel::burr_with_p(0.6, 0.9, 0.25).unwrap();
        let cfg = small(4);
        let good = run_replicate(&model, 100, &cfg, 0);
        let bad: Result<ReplicateOutcome> = Err(Error::EmptySample);
        let two = aggregate(&model, 100, &cfg, &[good.clone(), good.clone(), bad.clone(), bad.clone()]);
        assert_eq!(two.failure_count, 2);
        assert!(!two.failed());
        let three = aggregate(&model, 100, &cfg, &[good, bad.clone(), bad.clone(), bad]);
        assert!(three.failed());
        assert_eq!(three.first_failure, Some(Error::EmptySample));
    }
}
