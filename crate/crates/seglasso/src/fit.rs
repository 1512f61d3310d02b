//! The alternating estimation procedure at a fixed total number of segments:
//! segment Y − Fλ by exact joint DP, fit the bias on Y − Tμ by weighted
//! Lasso with weights built from the current σ, update σ², repeat until the
//! parameters stop moving. Also provides the per-position fixed-effect
//! baseline used for comparison.

use crate::dictionary::DictionaryMatrix;
use crate::dp::{dp_joint, CostIndex};
use crate::error::{Error, Result};
use crate::lasso::{penalized_objective, penalty_weights, solve_with, FunctionalFit, PenaltyWeights};
use crate::scalar::Real;
use crate::series::{fit_means, segmentation_signal, Segmentation, SeriesSet};

/// How σ^(0) is obtained before the first iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma0<T> {
    /// median(|Δy|) / (0.6745·√2) over within-series first differences.
    Robust,
    /// A user-supplied value.
    Plugin(T),
}

/// Configuration of one fixed-K fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub k_total: usize,
    pub gamma: T,
    /// Max-norm threshold on parameter changes between iterations.
    pub epsilon: T,
    pub max_iterations: usize,
    pub sigma0: Sigma0<T>,
    /// Cap on segments per series; `None` means the tightest feasible bound
    /// min(n_m, K − M + 1).
    pub k_max_per_series: Option<usize>,
    pub lasso_tol: T,
    pub lasso_max_sweeps: usize,
}

impl<T: Real> FitConfig<T> {
    pub fn new(k_total: usize) -> Self {
        Self {
            k_total,
            gamma: T::of(2.1),
            epsilon: T::of(1e-3),
            max_iterations: 100,
            sigma0: Sigma0::Robust,
            k_max_per_series: None,
            lasso_tol: T::of(1e-8),
            lasso_max_sweeps: crate::lasso::DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn with_k(&self, k_total: usize) -> Self {
        let mut c = self.clone();
        c.k_total = k_total;
        c
    }

    fn validate(&self, m: usize) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if self.k_total < m {
            return Err(Error::InvalidArgument(format!(
                "k_total = {} below the number of series {m}",
                self.k_total
            )));
        }
        Ok(())
    }
}

/// One row of the iteration trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord<T> {
    /// σ entering the iteration (used for the penalty weights).
    pub sigma: T,
    /// σ after the variance update.
    pub sigma_next: T,
    pub active_count: usize,
    /// Max-norm change of (μ, λ, σ) versus the previous iteration;
    /// infinite when the breakpoint configuration changed.
    pub max_delta: T,
    pub breakpoints_changed: bool,
    /// Penalized objective (weights frozen at this iteration's σ) entering
    /// the iteration, after the segmentation sub-step, and after the Lasso
    /// sub-step. Non-increasing left to right.
    pub objective_start: T,
    pub objective_after_segmentation: T,
    pub objective_after_lasso: T,
}

/// A complete fitted model for one K.
#[derive(Debug, Clone)]
pub struct ModelFit<T> {
    pub segmentation: Segmentation<T>,
    pub functional: FunctionalFit<T>,
    /// σ̂² = ‖Y − Tμ̂ − Fλ̂‖² / N.
    pub sigma2: T,
    pub trace: Vec<IterationRecord<T>>,
    pub converged: bool,
    /// Filled by model selection.
    pub mbic: Option<T>,
}

impl<T: Real> ModelFit<T> {
    /// Fitted bias restricted to the first series' grid.
    pub fn bias_on_first_series(&self, n_first: usize) -> &[T] {
        &self.functional.fitted[..n_first]
    }
}

/// True iff every iteration's frozen-weight objective is non-increasing
/// across both sub-steps, up to relative float noise.
pub fn trace_monotone<T: Real>(trace: &[IterationRecord<T>]) -> bool {
    trace.iter().all(|r| {
        let slack = T::of(1e-9) * (T::one() + r.objective_start.abs());
        r.objective_after_segmentation <= r.objective_start + slack
            && r.objective_after_lasso <= r.objective_after_segmentation + slack
    })
}

/// Parameter snapshot used by the stopping rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub breaks: Vec<Vec<usize>>,
    pub means: Vec<T>,
    pub lambda: Vec<T>,
    pub sigma: T,
}

/// True iff the breakpoint sets are identical and every continuous
/// parameter moved by less than epsilon in max norm.
pub fn has_converged<T: Real>(prev: &Snapshot<T>, curr: &Snapshot<T>, epsilon: T) -> bool {
    if prev.breaks != curr.breaks {
        return false;
    }
    if prev.means.len() != curr.means.len() || prev.lambda.len() != curr.lambda.len() {
        return false;
    }
    let mut delta = (prev.sigma - curr.sigma).abs();
    for (a, b) in prev.means.iter().zip(&curr.means) {
        delta = delta.max((*a - *b).abs());
    }
    for (a, b) in prev.lambda.iter().zip(&curr.lambda) {
        delta = delta.max((*a - *b).abs());
    }
    delta < epsilon
}

fn max_param_delta<T: Real>(prev: &Snapshot<T>, curr: &Snapshot<T>) -> T {
    if prev.breaks != curr.breaks {
        return T::infinity();
    }
    let mut delta = (prev.sigma - curr.sigma).abs();
    for (a, b) in prev.means.iter().zip(&curr.means) {
        delta = delta.max((*a - *b).abs());
    }
    for (a, b) in prev.lambda.iter().zip(&curr.lambda) {
        delta = delta.max((*a - *b).abs());
    }
    delta
}

/// Initial noise scale. The robust mode uses within-series first differences,
/// which are insensitive to the (still unknown) segment means.
pub fn initial_sigma<T: Real>(set: &SeriesSet<T>, mode: Sigma0<T>) -> Result<T> {
    match mode {
        Sigma0::Plugin(v) => {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("plugin sigma {v} invalid")));
            }
            Ok(v)
        }
        Sigma0::Robust => {
            if set.total_len() < 2 {
                return Err(Error::InvalidArgument("need at least 2 observations".into()));
            }
            let mut diffs: Vec<T> = Vec::new();
            for s in set.series() {
                for w in s.values.windows(2) {
                    diffs.push((w[1] - w[0]).abs());
                }
            }
            if diffs.is_empty() {
                return Err(Error::InvalidArgument(
                    "robust sigma needs a series with at least 2 observations".into(),
                ));
            }
            diffs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mid = diffs.len() / 2;
            let median = if diffs.len() % 2 == 1 {
                diffs[mid]
            } else {
                (diffs[mid - 1] + diffs[mid]) / T::of(2.0)
            };
            Ok(median / (T::of(0.6745) * T::of(2.0).sqrt()))
        }
    }
}

struct IterationState<T> {
    segmentation: Segmentation<T>,
    functional: FunctionalFit<T>,
    rss: T,
    objective: T,
}

fn slices_of<'a, T>(flat: &'a [T], lengths: &[usize]) -> Vec<&'a [T]> {
    let mut out = Vec::with_capacity(lengths.len());
    let mut start = 0;
    for &l in lengths {
        out.push(&flat[start..start + l]);
        start += l;
    }
    out
}

fn sum_sq<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x)
}

/// The alternating DP-Lasso procedure at fixed K.
///
/// λ^(0) = 0, so the first segmentation runs on the raw data. Each iteration
/// freezes the penalty weights at the entering σ, segments Y − Fλ, refits the
/// Lasso on Y − Tμ warm-started from the previous λ, then updates σ². Stops
/// when all parameters (including the breakpoint sets) are stable; if a
/// breakpoint configuration recurs without convergence, the iterate with the
/// smallest penalized objective is returned with `converged = false`.
pub fn fit_fixed_k<T: Real>(
    set: &SeriesSet<T>,
    dict: &DictionaryMatrix<T>,
    config: &FitConfig<T>,
) -> Result<ModelFit<T>> {
    let m = set.num_series();
    config.validate(m)?;
    let lengths = set.lengths();
    let n_total = set.total_len();
    if dict.num_rows() != n_total {
        return Err(Error::Mismatch(format!(
            "dictionary has {} rows for {} observations",
            dict.num_rows(),
            n_total
        )));
    }
    let y = set.flat_values();
    let k_cap = config
        .k_max_per_series
        .unwrap_or(usize::MAX);

    let mut sigma = initial_sigma(set, config.sigma0)?;
    let mut lambda = vec![T::zero(); dict.num_columns()];
    let mut f_lambda = vec![T::zero(); n_total];
    let mut prev: Option<Snapshot<T>> = None;
    let mut trace: Vec<IterationRecord<T>> = Vec::new();
    let mut history: Vec<IterationState<T>> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<Vec<usize>>, usize> =
        std::collections::HashMap::new();
    let mut converged = false;
    let mut final_idx: Option<usize> = None;

    for _ in 0..config.max_iterations {
        let weights: PenaltyWeights<T> = penalty_weights(sigma, dict, config.gamma)?;

        let objective_start = match prev.as_ref() {
            Some(p) => {
                let idx = history.len() - 1;
                let tmu = segmentation_signal(&history[idx].segmentation);
                let res: Vec<T> = y
                    .iter()
                    .zip(&tmu)
                    .zip(&f_lambda)
                    .map(|((&yv, &mv), &fv)| yv - mv - fv)
                    .collect();
                let _ = p;
                penalized_objective(&res, &lambda, &weights)
            }
            None => {
                // μ = 0 is a feasible reference point before any segmentation
                let res: Vec<T> = y.iter().zip(&f_lambda).map(|(&yv, &fv)| yv - fv).collect();
                penalized_objective(&res, &lambda, &weights)
            }
        };

        // (i) exact joint segmentation of Y − Fλ
        let seg_target: Vec<T> = y.iter().zip(&f_lambda).map(|(&yv, &fv)| yv - fv).collect();
        let target_slices = slices_of(&seg_target, &lengths);
        let costs: Vec<CostIndex<T>> = target_slices
            .iter()
            .map(|s| CostIndex::new(s))
            .collect::<Result<_>>()?;
        let (breaks, _) = dp_joint(&costs, config.k_total, k_cap)?;
        let segmentation = fit_means(&breaks, &target_slices)?;
        let tmu = segmentation_signal(&segmentation);

        let res_after_seg: Vec<T> = y
            .iter()
            .zip(&tmu)
            .zip(&f_lambda)
            .map(|((&yv, &mv), &fv)| yv - mv - fv)
            .collect();
        let objective_after_segmentation =
            penalized_objective(&res_after_seg, &lambda, &weights);

        // (ii) weighted Lasso on Y − Tμ
        let lasso_target: Vec<T> = y.iter().zip(&tmu).map(|(&yv, &mv)| yv - mv).collect();
        let functional = solve_with(
            dict,
            &lasso_target,
            &weights,
            config.lasso_tol,
            config.lasso_max_sweeps,
            Some(&lambda),
        )?;
        lambda = functional.lambda.clone();
        f_lambda = functional.fitted.clone();
        let res_after_lasso: Vec<T> = lasso_target
            .iter()
            .zip(&f_lambda)
            .map(|(&rv, &fv)| rv - fv)
            .collect();
        let objective_after_lasso = penalized_objective(&res_after_lasso, &lambda, &weights);

        // (iii) variance update
        let rss = sum_sq(&res_after_lasso);
        let sigma_next = (rss / T::of_usize(n_total)).sqrt();

        let snapshot = Snapshot {
            breaks: breaks.clone(),
            means: segmentation
                .per_series()
                .iter()
                .flat_map(|s| s.means.iter().copied())
                .collect(),
            lambda: lambda.clone(),
            sigma: sigma_next,
        };

        let (max_delta, breakpoints_changed, is_converged) = match prev.as_ref() {
            Some(p) => (
                max_param_delta(p, &snapshot),
                p.breaks != snapshot.breaks,
                has_converged(p, &snapshot, config.epsilon),
            ),
            None => (T::infinity(), true, false),
        };

        trace.push(IterationRecord {
            sigma,
            sigma_next,
            active_count: functional.active_set.len(),
            max_delta,
            breakpoints_changed,
            objective_start,
            objective_after_segmentation,
            objective_after_lasso,
        });

        history.push(IterationState {

            segmentation,
            functional,
            rss,
            objective: objective_after_lasso,
        });
        let this_idx = history.len() - 1;

        if is_converged {
            converged = true;
            final_idx = Some(this_idx);
            break;
        }

        // Oscillation guard: revisiting a breakpoint configuration from
        // before the previous iteration means the alternation is cycling
        // (a configuration that merely stays put keeps iterating toward
        // parameter convergence). Return the best-objective iterate.
        if let Some(&last_idx) = seen.get(&breaks) {
            if last_idx + 1 < this_idx {
                let best = (0..history.len())
                    .min_by(|&a, &b| {
                        history[a].objective.partial_cmp(&history[b].objective).unwrap()
                    })
                    .unwrap();
                final_idx = Some(best);
                break;
            }
        }
        seen.insert(breaks, this_idx);

        prev = Some(snapshot);
        sigma = sigma_next;
    }

    let idx = final_idx.unwrap_or(history.len() - 1);
    let state = history.swap_remove(idx);
    let sigma2 = state.rss / T::of_usize(n_total);
    Ok(ModelFit {
        segmentation: state.segmentation,
        functional: state.functional,
        sigma2,
        trace,
        converged,
        mbic: None,
    })
}

/// The per-position fixed-effect baseline: the bias is a free value β_t at
/// every grid position, estimated as the across-series mean of the
/// segmentation residual, centered to Σ_t β_t = 0 with the offset absorbed
/// into the segment means. Requires all series on a common index grid.
pub fn fit_position_baseline<T: Real>(
    set: &SeriesSet<T>,
    config: &FitConfig<T>,
) -> Result<ModelFit<T>> {
    let m = set.num_series();
    config.validate(m)?;
    let lengths = set.lengths();
    let n = lengths[0];
    if lengths.iter().any(|&l| l != n) {
        return Err(Error::InvalidArgument(
            "position baseline requires all series on a common index grid".into(),
        ));
    }
    let n_total = set.total_len();
    let y = set.flat_values();
    let k_cap = config.k_max_per_series.unwrap_or(usize::MAX);

    let mut sigma = initial_sigma(set, config.sigma0)?;
    let mut beta = vec![T::zero(); n];
    let mut prev: Option<Snapshot<T>> = None;
    let mut trace = Vec::new();
    let mut history: Vec<IterationState<T>> = Vec::new();
    let mut seen: std::collections::HashMap<Vec<Vec<usize>>, usize> =
        std::collections::HashMap::new();
    let mut converged = false;
    let mut final_idx: Option<usize> = None;

    let beta_signal = |beta: &[T]| -> Vec<T> {
        (0..n_total).map(|i| beta[i % n]).collect()
    };

    for _ in 0..config.max_iterations {
        let bias = beta_signal(&beta);
        let objective_start = match history.last() {
            Some(state) => {
                let tmu = segmentation_signal(&state.segmentation);
                sum_sq(
                    &y.iter()
                        .zip(&tmu)
                        .zip(&bias)
                        .map(|((&yv, &mv), &bv)| yv - mv - bv)
                        .collect::<Vec<T>>(),
                )
            }
            None => sum_sq(
                &y.iter().zip(&bias).map(|(&yv, &bv)| yv - bv).collect::<Vec<T>>(),
            ),
        };

        // (i) joint segmentation of Y − β
        let seg_target: Vec<T> = y.iter().zip(&bias).map(|(&yv, &bv)| yv - bv).collect();
        let target_slices = slices_of(&seg_target, &lengths);
        let costs: Vec<CostIndex<T>> = target_slices
            .iter()
            .map(|s| CostIndex::new(s))
            .collect::<Result<_>>()?;
        let (breaks, _) = dp_joint(&costs, config.k_total, k_cap)?;
        let mut segmentation = fit_means(&breaks, &target_slices)?;
        let mut tmu = segmentation_signal(&segmentation);
        let objective_after_segmentation = sum_sq(
            &y.iter()
                .zip(&tmu)
                .zip(&bias)
                .map(|((&yv, &mv), &bv)| yv - mv - bv)
                .collect::<Vec<T>>(),
        );

        // (ii) per-position effect, centered, offset absorbed into the means
        let mut new_beta = vec![T::zero(); n];
        for (i, (&yv, &mv)) in y.iter().zip(&tmu).enumerate() {
            new_beta[i % n] = new_beta[i % n] + (yv - mv);
        }
        let m_t = T::of_usize(m);
        for b in &mut new_beta {
            *b = *b / m_t;
        }
        let offset = new_beta.iter().fold(T::zero(), |a, &b| a + b) / T::of_usize(n);
        for b in &mut new_beta {
            *b = *b - offset;
        }
        for s in segmentation_means_mut(&mut segmentation) {
            *s = *s + offset;
        }
        tmu = segmentation_signal(&segmentation);
        beta = new_beta;
        let bias = beta_signal(&beta);
        let residual: Vec<T> = y
            .iter()
            .zip(&tmu)
            .zip(&bias)
            .map(|((&yv, &mv), &bv)| yv - mv - bv)
            .collect();
        let rss = sum_sq(&residual);
        let objective_after_lasso = rss;

        // (iii) variance update
        let sigma_next = (rss / T::of_usize(n_total)).sqrt();

        let snapshot = Snapshot {
            breaks: breaks.clone(),
            means: segmentation
                .per_series()
                .iter()
                .flat_map(|s| s.means.iter().copied())
                .collect(),
            lambda: beta.clone(),
            sigma: sigma_next,
        };
        let (max_delta, breakpoints_changed, is_converged) = match prev.as_ref() {
            Some(p) => (
                max_param_delta(p, &snapshot),
                p.breaks != snapshot.breaks,
                has_converged(p, &snapshot, config.epsilon),
            ),
            None => (T::infinity(), true, false),
        };
        trace.push(IterationRecord {
            sigma,
            sigma_next,
            active_count: 0,
            max_delta,
            breakpoints_changed,
            objective_start,
            objective_after_segmentation,
            objective_after_lasso,
        });
        history.push(IterationState {

            segmentation,
            functional: FunctionalFit {
                lambda: Vec::new(),
                active_set: Vec::new(),
                objective: rss,
                fitted: bias,
            },
            rss,
            objective: rss,
        });
        let this_idx = history.len() - 1;

        if is_converged {
            converged = true;
            final_idx = Some(this_idx);
            break;
        }
        if let Some(&last_idx) = seen.get(&breaks) {
            if last_idx + 1 < this_idx {
                let best = (0..history.len())
                    .min_by(|&a, &b| {
                        history[a].objective.partial_cmp(&history[b].objective).unwrap()
                    })
                    .unwrap();
                final_idx = Some(best);
                break;
            }
        }
        seen.insert(breaks, this_idx);
        prev = Some(snapshot);
        sigma = sigma_next;
    }

    let idx = final_idx.unwrap_or(history.len() - 1);
    let state = history.swap_remove(idx);
    let sigma2 = state.rss / T::of_usize(n_total);
    Ok(ModelFit {
        segmentation: state.segmentation,
        functional: state.functional,
        sigma2,
        trace,
        converged,
        mbic: None,
    })
}

fn segmentation_means_mut<T: Real>(seg: &mut Segmentation<T>) -> impl Iterator<Item = &mut T> {
    seg.per_series_mut().iter_mut().flat_map(|s| s.means.iter_mut())
}
