//! Exact least-squares segmentation.
//!
//! Stage 1 runs the classical dynamic program on each series, producing the
//! optimal within-segment sum of squares for every segment count up to a cap.
//! Stage 2 is a second dynamic program over the sequence of series that
//! allocates a total budget of K segments.
//!
//! Tie-breaking is deterministic: at every DP step the backtrack prefers the
//! smallest last breakpoint, and stage 2 prefers the smallest segment count
//! for the current series.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Prefix sums supporting O(1) segment cost queries:
/// `c(i, j] = Σ y² − (Σ y)² / (j − i)` over observations i+1..=j.
#[derive(Debug, Clone)]
pub struct CostIndex<T> {
    s1: Vec<T>,
    s2: Vec<T>,
}

impl<T: Real> CostIndex<T> {
    pub fn new(values: &[T]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Mismatch("cannot index an empty series".into()));
        }
        let mut s1 = Vec::with_capacity(values.len() + 1);
        let mut s2 = Vec::with_capacity(values.len() + 1);
        s1.push(T::zero());
        s2.push(T::zero());
        let (mut a1, mut a2) = (T::zero(), T::zero());
        for &v in values {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("segment cost input {v}")));
            }
            a1 = a1 + v;
            a2 = a2 + v * v;
            s1.push(a1);
            s2.push(a2);
        }
        Ok(Self { s1, s2 })
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.s1.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Within-segment sum of squares of the interval (i, j], 0 ≤ i < j ≤ n.
    /// Negative values from prefix-sum cancellation are clamped to 0.
    #[inline]
    pub fn cost(&self, i: usize, j: usize) -> T {
        debug_assert!(i < j && j < self.s1.len());
        let d1 = self.s1[j] - self.s1[i];
        let d2 = self.s2[j] - self.s2[i];
        let c = d2 - d1 * d1 / T::of_usize(j - i);
        if c > T::zero() {
            c
        } else {
            T::zero()
        }
    }
}

/// Stage-1 table for one series: `optimal_cost(k)` is the global minimum of
/// the within-segment sum of squares over segmentations into exactly k
/// segments; `backtrack(k)` recovers one optimizer.
#[derive(Debug, Clone)]
pub struct DpTable<T> {
    n: usize,
    k_max: usize,
    // cost[k-1][j] for j in 0..=n (entries with j < k are unused)
    cost: Vec<Vec<T>>,
    // back[k-1][j] = end of segment k-1 in the optimal k-segmentation of 1..=j
    back: Vec<Vec<usize>>,
}

impl<T: Real> DpTable<T> {
    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn series_len(&self) -> usize {
        self.n
    }

    /// Optimal cost of segmenting the whole series into exactly k segments.
    pub fn optimal_cost(&self, k: usize) -> T {
        self.cost_at(k, self.n)
    }

    /// Optimal cost of segmenting observations 1..=j into exactly k segments.
    pub fn cost_at(&self, k: usize, j: usize) -> T {
        assert!(k >= 1 && k <= self.k_max && k <= j && j <= self.n);
        self.cost[k - 1][j]
    }

    /// Segment ends (1-based, last = n) of one optimal k-segmentation.
    pub fn backtrack(&self, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.k_max && k <= self.n);
        let mut ends = vec![0usize; k];
        let mut j = self.n;
        for kk in (1..=k).rev() {
            ends[kk - 1] = j;
            j = self.back[kk - 1][j];
        }
        ends
    }
}

/// Classical one-series segmentation DP, exact for every k ≤ `k_max`.
pub fn dp_single<T: Real>(costs: &CostIndex<T>, k_max: usize) -> Result<DpTable<T>> {
    let n = costs.len();
    if k_max == 0 || k_max > n {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} not in 1..={n}"
        )));
    }
    let mut cost = vec![vec![T::infinity(); n + 1]; k_max];
    let mut back = vec![vec![0usize; n + 1]; k_max];
    for j in 1..=n {
        cost[0][j] = costs.cost(0, j);
    }
    for k in 2..=k_max {
        for j in k..=n {
            let mut best = T::infinity();
            let mut best_i = k - 1;
            // smallest split wins ties (strict improvement only)
            for i in (k - 1)..j {
                let c = cost[k - 2][i] + costs.cost(i, j);
                if c < best {
                    best = c;
                    best_i = i;
                }
            }
            cost[k - 1][j] = best;
            back[k - 1][j] = best_i;
        }
    }
    Ok(DpTable { n, k_max, cost, back })
}

/// Joint segmentation: minimizes the summed stage-1 costs over all ways to
/// allocate `k_total` segments across the series, each series keeping
/// between 1 and `k_max_per_series` segments. Returns the per-series segment
/// ends and the optimal total cost.
pub fn dp_joint<T: Real>(
    series_costs: &[CostIndex<T>],
    k_total: usize,
    k_max_per_series: usize,
) -> Result<(Vec<Vec<usize>>, T)> {
    let m = series_costs.len();
    if m == 0 {
        return Err(Error::InvalidArgument("no series to segment".into()));
    }
    let caps: Vec<usize> = series_costs
        .iter()
        .map(|c| c.len().min(k_max_per_series).min(k_total.saturating_sub(m - 1)))
        .collect();
    let cap_sum: usize = caps.iter().sum();
    if k_total < m || k_total > cap_sum {
        return Err(Error::InvalidArgument(format!(
            "k_total = {k_total} infeasible: must lie in {m}..={cap_sum}"
        )));
    }

    let tables: Vec<DpTable<T>> = series_costs
        .iter()
        .zip(&caps)
        .map(|(c, &cap)| dp_single(c, cap))
        .collect::<Result<_>>()?;

    // Stage 2: alloc[m][k] = optimal cost of giving k segments to the first
    // m series. Ties prefer the smallest segment count for the current series.
    let mut alloc = vec![vec![T::infinity(); k_total + 1]; m + 1];
    let mut choice = vec![vec![0usize; k_total + 1]; m + 1];
    alloc[0][0] = T::zero();
    for (mi, table) in tables.iter().enumerate() {
        for k in (mi + 1)..=k_total {
            let mut best = T::infinity();
            let mut best_km = 0usize;
            let upper = caps[mi].min(k - mi);
            for km in 1..=upper {
                let prev = alloc[mi][k - km];
                if !prev.is_finite() {
                    continue;
                }
                let c = prev + table.optimal_cost(km);
                if c < best {
                    best = c;
                    best_km = km;
                }
            }
            alloc[mi + 1][k] = best;
            choice[mi + 1][k] = best_km;
        }
    }

    let total = alloc[m][k_total];
    if !total.is_finite() {
        return Err(Error::Numerical("joint allocation produced no solution".into()));
    }
    let mut ks = vec![0usize; m];
    let mut k = k_total;
    for mi in (0..m).rev() {
        ks[mi] = choice[mi + 1][k];
        k -= ks[mi];
    }
    let breaks = tables
        .iter()
        .zip(&ks)
        .map(|(t, &km)| t.backtrack(km))
        .collect();
    Ok((breaks, total))
}
