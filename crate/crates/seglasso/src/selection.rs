//! Modified BIC for joint segmentation and the K sweep that maximizes it.

use crate::dictionary::DictionaryMatrix;
use crate::error::{Error, Result};
use crate::fit::{fit_fixed_k, fit_position_baseline, FitConfig, ModelFit};
use crate::scalar::Real;
use crate::series::SeriesSet;

/// mBIC(K) = lnΓ((N−K+1)/2) − ((N−K+1)/2)·ln SS_wg
///         + (1/2 − (K−M))·ln N − (1/2)·Σ ln(segment length),
/// maximized over K. A perfect fit (SS_wg = 0) returns +∞, which the sweep
/// treats as degenerate: it wins, ties broken toward smaller K.
pub fn mbic_score<T: Real>(
    ss_wg: T,
    n_total: usize,
    num_series: usize,
    segment_lengths: &[usize],
) -> Result<T> {
    let k = segment_lengths.len();
    if k == 0 {
        return Err(Error::InvalidArgument("no segments".into()));
    }
    if n_total <= k {
        return Err(Error::InvalidArgument(format!(
            "mBIC needs N > K, got N = {n_total}, K = {k}"
        )));
    }
    if !(ss_wg >= T::zero()) || !ss_wg.is_finite() {
        return Err(Error::NonFinite(format!("SS_wg = {ss_wg}")));
    }
    if segment_lengths.iter().any(|&l| l == 0) {
        return Err(Error::InvalidArgument("zero-length segment".into()));
    }
    if ss_wg == T::zero() {
        return Ok(T::infinity());
    }
    let n_t = T::of_usize(n_total);
    let k_t = T::of_usize(k);
    let m_t = T::of_usize(num_series);
    let half = T::of(0.5);
    let a = (n_t - k_t + T::one()) / T::of(2.0);
    let mut score = a.ln_gamma() - a * ss_wg.ln() + (half - (k_t - m_t)) * n_t.ln();
    for &l in segment_lengths {
        score = score - half * T::of_usize(l).ln();
    }
    Ok(score)
}

/// Which estimator the sweep runs at each K.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    /// DP segmentation alternated with the weighted Lasso on a dictionary.
    Lasso,
    /// DP segmentation alternated with a free per-position fixed effect.
    Position,
}

/// Outcome of one K in the sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry<T> {
    pub k: usize,
    pub mbic: T,
    pub fit: ModelFit<T>,
}

#[derive(Debug, Clone)]
pub struct SelectionResult<T> {
    pub sweep: Vec<SweepEntry<T>>,
    pub chosen_k: usize,
    /// Index into `sweep` of the chosen fit.
    chosen_idx: usize,
}

impl<T: Real> SelectionResult<T> {
    pub fn chosen(&self) -> &SweepEntry<T> {
        &self.sweep[self.chosen_idx]
    }
}

/// Default upper sweep bound: M·⌈n̄/10⌉, capped by feasibility.
pub fn default_k_max<T: Real>(set: &SeriesSet<T>) -> usize {
    let m = set.num_series();
    let n_bar_ceil_tenth = set.total_len().div_ceil(m).div_ceil(10).max(1);
    (m * n_bar_ceil_tenth).min(set.total_len())
}

/// Fits every K in [k_min, k_max] independently (cold start), scores each by
/// mBIC, and returns the argmax with ties broken toward smaller K. Individual
/// fit failures are tolerated; only an empty sweep is an error.
pub fn select_k<T: Real>(
    set: &SeriesSet<T>,
    dict: Option<&DictionaryMatrix<T>>,
    k_min: usize,
    k_max: usize,
    config: &FitConfig<T>,
    method: FitMethod,
) -> Result<SelectionResult<T>> {
    let m = set.num_series();
    let n_total = set.total_len();
    if k_min < m || k_min > k_max || k_max > n_total {
        return Err(Error::InvalidArgument(format!(
            "sweep range [{k_min}, {k_max}] infeasible for M = {m}, N = {n_total}"
        )));
    }
    if method == FitMethod::Lasso && dict.is_none() {
        return Err(Error::InvalidArgument("the lasso method needs a dictionary".into()));
    }
    let mut sweep: Vec<SweepEntry<T>> = Vec::new();
    let mut last_err: Option<Error> = None;
    for k in k_min..=k_max {
        let cfg = config.with_k(k);
        let fitted = match method {
            FitMethod::Lasso => fit_fixed_k(set, dict.unwrap(), &cfg),
            FitMethod::Position => fit_position_baseline(set, &cfg),
        };
        let mut fit = match fitted {
            Ok(f) => f,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let ss = fit.sigma2 * T::of_usize(n_total);
        let score = match mbic_score(ss, n_total, m, &fit.segmentation.all_segment_lengths()) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        fit.mbic = Some(score);
        sweep.push(SweepEntry { k, mbic: score, fit });
    }
    if sweep.is_empty() {
        return Err(last_err
            .unwrap_or_else(|| Error::Numerical("every fit in the sweep failed".into())));
    }
    // strict > keeps the smallest K on ties (sweep is ascending in K)
    let mut chosen_idx = 0;
    for (i, e) in sweep.iter().enumerate() {
        if e.mbic > sweep[chosen_idx].mbic {
            chosen_idx = i;
        }
    }
    let chosen_k = sweep[chosen_idx].k;
    Ok(SelectionResult { sweep, chosen_k, chosen_idx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{assemble, BasisKind, BasisSpec};
    use crate::series::Series;

    #[test]
    fn spec_example_against_direct_formula() {
        // N=200, M=2, K=4, SS=150, lengths {50,50,60,40}
        let got = mbic_score(150.0f64, 200, 2, &[50, 50, 60, 40]).unwrap();
        let a = (200.0 - 4.0 + 1.0) / 2.0;
        let want = a.ln_gamma() - a * 150.0f64.ln() + (0.5 - 2.0) * 200.0f64.ln()
            - 0.5 * (50.0f64.ln() + 50.0f64.ln() + 60.0f64.ln() + 40.0f64.ln());
        assert!((got - want).abs() <= 1e-12 * want.abs());
    }

    #[test]
    fn smaller_ss_scores_higher() {
        let lengths = [30usize, 20, 50];
        let a = mbic_score(80.0f64, 100, 1, &lengths).unwrap();
        let b = mbic_score(79.0f64, 100, 1, &lengths).unwrap();
        assert!(b > a);
    }

    #[test]
    fn length_penalty_follows_am_gm() {
        // Σ ln(length) is largest for equal lengths (AM-GM), so the
        // −½Σln(length) term scores an equal split strictly lower.
        let even = mbic_score(50.0f64, 120, 2, &[30, 30, 30, 30]).unwrap();
        let skew = mbic_score(50.0f64, 120, 2, &[5, 55, 40, 20]).unwrap();
        assert!(skew > even);
    }

    #[test]
    fn extra_segment_penalized_when_all_else_equal() {
        // same SS and same length multiset except a split of one segment
        let k4 = mbic_score(50.0f64, 400, 2, &[100, 100, 100, 100]).unwrap();
        let k5 = mbic_score(50.0f64, 400, 2, &[100, 100, 100, 50, 50]).unwrap();
        assert!(k4 > k5);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        assert!(mbic_score(0.0f64, 100, 1, &[50, 50]).unwrap().is_infinite());
        assert!(mbic_score(1.0f64, 4, 1, &[1, 1, 1, 1]).is_err());
        assert!(mbic_score(-1.0f64, 100, 1, &[50, 50]).is_err());
        assert!(mbic_score(f64::NAN, 100, 1, &[50, 50]).is_err());
        assert!(mbic_score(1.0f64, 100, 1, &[]).is_err());
    }

    #[test]
    fn score_is_bitwise_reproducible() {
        let a = mbic_score(123.456f64, 500, 3, &[100, 150, 120, 80, 50]).unwrap();
        let b = mbic_score(123.456f64, 500, 3, &[100, 150, 120, 80, 50]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn noiseless_two_series() -> SeriesSet<f64> {
        let times: Vec<f64> = (1..=30).map(|t| t as f64).collect();
        let a: Vec<f64> = (0..30).map(|i| if i < 10 { 0.0 } else { 2.0 }).collect();
        let b: Vec<f64> = (0..30)
            .map(|i| if i < 18 { 1.0 } else { -1.0 })
            .collect();
        SeriesSet::new(vec![
            Series::new("a", times.clone(), a, None).unwrap(),
            Series::new("b", times, b, None).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn noiseless_sweep_picks_true_k() {
        let set = noiseless_two_series();
        let dict = assemble(
            &[BasisSpec::on_time(BasisKind::FourierFixed { j_max: 2, length: 30.0 })],
            &set,
        )
        .unwrap();
        let res =
            select_k(&set, Some(&dict), 2, 8, &FitConfig::new(2), FitMethod::Lasso).unwrap();
        // SS hits 0 at the true K = 4; ties among degenerate K resolve downward
        assert_eq!(res.chosen_k, 4);
        assert!(res.chosen().fit.sigma2 <= 1e-20);
        assert_eq!(res.sweep.len(), 7);
    }

    #[test]
    fn position_method_sweep_runs() {
        let set = noiseless_two_series();
        let res = select_k(&set, None, 2, 6, &FitConfig::new(2), FitMethod::Position).unwrap();
        assert_eq!(res.chosen_k, 4);
    }

    #[test]
    fn infeasible_ranges_rejected() {
        let set = noiseless_two_series();
        let cfg = FitConfig::new(2);
        assert!(select_k(&set, None, 1, 5, &cfg, FitMethod::Position).is_err());
        assert!(select_k(&set, None, 5, 4, &cfg, FitMethod::Position).is_err());
        assert!(select_k(&set, None, 2, 61, &cfg, FitMethod::Position).is_err());
        assert!(select_k(&set, None, 2, 5, &cfg, FitMethod::Lasso).is_err());
    }

    #[test]
    fn default_k_max_formula() {
        let set = noiseless_two_series(); // M=2, n̄=30 → 2·3 = 6
        assert_eq!(default_k_max(&set), 6);
    }
}
