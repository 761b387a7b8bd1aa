//! Sample-fraction selection.
//!
//! The second-order estimator uses the deterministic fraction
//! u_n = floor(n^(1-epsilon)); the tail-index estimators use the Reiss-Thomas
//! heuristic
//!
//! k* = argmin_k (1/k) sum_{i=1}^{k} i^theta |g(i) - median(g(1), ..., g(k))|
//!
//! searched over k in [max(k_min, ceil(k_floor_fraction n)), floor(k_max_fraction n)].
//! The objective is zero at k = 1 and tiny for the first few k whatever the
//! curve looks like, hence the proportional floor.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub epsilon: f64,
    pub theta: f64,
    pub k_min: usize,
    pub k_floor_fraction: f64,
    pub k_max_fraction: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            theta: 0.3,
            k_min: 2,
            k_floor_fraction: 0.05,
            k_max_fraction: 0.9,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(0.0..=0.5).contains(&self.theta) {
            return Err(Error::Domain(format!("theta must lie in [0, 0.5], got {}", self.theta)));
        }
        if self.k_min < 2 {
            return Err(Error::Domain(format!("k_min must be at least 2, got {}", self.k_min)));
        }
        if !(0.0..1.0).contains(&self.k_floor_fraction) || self.k_floor_fraction >= self.k_max_fraction {
            return Err(Error::Domain(format!(
                "k_floor_fraction must lie in [0, k_max_fraction), got {}",
                self.k_floor_fraction
            )));
        }
        if !(self.k_max_fraction > 0.0 && self.k_max_fraction < 1.0) {
            return Err(Error::Domain(format!(
                "k_max_fraction must lie in (0, 1), got {}",
                self.k_max_fraction
            )));
        }
        Ok(())
    }

    /// Smallest fraction searched for a sample of size n.
    pub fn k_lo(&self, n: usize) -> usize {
        let floor = (self.k_floor_fraction * n as f64 - 1e-9).ceil().max(0.0) as usize;
        floor.max(self.k_min)
    }

    /// Largest admissible fraction for a sample of size n, never above n - 1.
    pub fn k_max(&self, n: usize) -> usize {
        ((self.k_max_fraction * n as f64).floor() as usize).min(n.saturating_sub(1))
    }
}

/// floor(n^(1-epsilon)) clamped to [2, n-1]; requires n >= 3.
pub fn u_n(n: usize, epsilon: f64) -> Result<usize> {
    if n < 3 {
        return Err(Error::Range { what: "n", value: n, lo: 3, hi: usize::MAX });
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let raw = ((1.0 - epsilon) * (n as f64).ln()).exp();
    // guard against n^(1-eps) landing a hair below an integer
    let floor = (raw * (1.0 + 1e-12)).floor() as usize;
    Ok(floor.clamp(2, n - 1))
}

/// Fenwick tree over value ranks.
struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self { tree: vec![0.0; n + 1] }
    }

    fn add(&mut self, pos: usize, value: f64) {
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += value;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `0..end`.
    fn prefix(&self, end: usize) -> f64 {
        let mut i = end;
        let mut total = 0.0;
        while i > 0 {
            total += self.tree[i];
            i &= i - 1;
        }
        total
    }

    /// Smallest position whose prefix count through it reaches `target`.
    fn lower_bound(&self, target: f64) -> usize {
        let mut pos = 0;
        let mut rest = target;
        let mut step = (self.tree.len() - 1).next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] < rest {
                pos = next;
                rest -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Reiss-Thomas objective for every k in `1..=curve.len()`; entry `k - 1`
/// holds k. Runs in O(K log K).
pub fn reiss_thomas_objective(curve: &[f64], theta: f64) -> Vec<f64> {
    let len = curve.len();
    let mut order: Vec<usize> = (0..len).collect();
    order.sort_by(|&a, &b| curve[a].total_cmp(&curve[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| curve[i]).collect();
    let mut rank = vec![0; len];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let (mut count, mut w_sum, mut wg_sum) = (Fenwick::new(len), Fenwick::new(len), Fenwick::new(len));
    let (mut w_total, mut wg_total) = (0.0, 0.0);
    let mut out = Vec::with_capacity(len);
    for (k0, &g) in curve.iter().enumerate() {
        let k = k0 + 1;
        let w = (k as f64).powf(theta);
        count.add(rank[k0], 1.0);
        w_sum.add(rank[k0], w);
        wg_sum.add(rank[k0], w * g);
        w_total += w;
        wg_total += w * g;
        let lower = sorted[count.lower_bound(k.div_ceil(2) as f64)];
        let med = if k % 2 == 1 {
            lower
        } else {
            0.5 * (lower + sorted[count.lower_bound((k / 2 + 1) as f64)])
        };
        let split = sorted.partition_point(|&v| v <= med);
        let (w_lo, wg_lo) = (w_sum.prefix(split), wg_sum.prefix(split));
        let below = med * w_lo - wg_lo;
        let above = (wg_total - wg_lo) - med * (w_total - w_lo);
        out.push((below + above).max(0.0) / k as f64);
    }
    out
}

/// Argmin of the objective of `values` over positions `lo..=hi` (1-based);
/// ties go to the smaller position.
fn argmin_objective(values: &[f64], lo: usize, hi: usize, theta: f64) -> usize {
    let objective = reiss_thomas_objective(&values[..hi], theta);
    let mut best = lo;
    for k in lo..=hi {
        if objective[k - 1] < objective[best - 1] {
            best = k;
        }
    }
    best
}

/// Reiss-Thomas choice of the sample fraction for the estimator curve
/// `k -> curve(k)`. Ties go to the smaller k.
pub fn reiss_thomas_k<F>(curve: F, n: usize, cfg: &SelectionConfig) -> Result<usize>
where
    F: Fn(usize) -> f64,
{
    cfg.validate()?;
    let (k_lo, k_max) = (cfg.k_lo(n), cfg.k_max(n));
    if k_lo > k_max {
        return Err(Error::EmptyRange { kmin: k_lo, kmax: k_max });
    }
    let values: Vec<f64> = (1..=k_max).map(&curve).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("estimator curve is not finite at k = {}", i + 1)));
    }
    Ok(argmin_objective(&values, k_lo, k_max, cfg.theta))
}

/// Reiss-Thomas choice over a curve with gaps: `curve[k - 1]` is `None`
/// where the estimator is undefined. Only the defined points enter the
/// objective, in order of k; returns `None` if no defined point lies in
/// the search range.
pub fn reiss_thomas_k_sparse(curve: &[Option<f64>], n: usize, cfg: &SelectionConfig) -> Result<Option<usize>> {
    cfg.validate()?;
    let (k_lo, k_max) = (cfg.k_lo(n), cfg.k_max(n).min(curve.len()));
    let mut ks = Vec::new();
    let mut values = Vec::new();
    for (i, v) in curve[..k_max].iter().enumerate() {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            ks.push(i + 1);
            values.push(v);
        }
    }
    let lo = ks.partition_point(|&k| k < k_lo) + 1;
    if lo > ks.len() {
        return Ok(None);
    }
    let best = argmin_objective(&values, lo, ks.len(), cfg.theta);
    Ok(Some(ks[best - 1]))
}
