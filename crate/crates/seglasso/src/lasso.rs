//! Weighted-ℓ₁ penalized least squares:
//!
//! minimize over λ:  ‖r − Fλ‖² + 2 Σ_j w_j |λ_j|
//!
//! solved by cyclic coordinate-wise minimization in dictionary ID order,
//! stopping when the KKT violation falls below a tolerance relative to the
//! target norm. The KKT contract, not the algorithm, is the normative part:
//! at the optimum, φ_jᵀ(r − Fλ) = sign(λ_j)·w_j on the support and
//! |φ_jᵀ(r − Fλ)| ≤ w_j off it. Zero-norm columns are pinned at zero.

use crate::dictionary::DictionaryMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-column penalty weights w_j = σ ‖φ_j‖_N √(γ log J). Pinned (zero-norm)
/// columns carry an infinite weight, which fixes their coefficient at zero.
#[derive(Debug, Clone)]
pub struct PenaltyWeights<T> {
    pub gamma: T,
    pub sigma: T,
    weights: Vec<T>,
}

impl<T: Real> PenaltyWeights<T> {
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> T {
        self.weights[j]
    }

    pub fn is_pinned(&self, j: usize) -> bool {
        !self.weights[j].is_finite()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Computes the penalty weights for a dictionary and noise level.
pub fn penalty_weights<T: Real>(
    sigma: T,
    dict: &DictionaryMatrix<T>,
    gamma: T,
) -> Result<PenaltyWeights<T>> {
    if !(gamma > T::zero()) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must be positive")));
    }
    if !(sigma >= T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma = {sigma} must be finite and >= 0")));
    }
    let j_count = dict.num_columns();
    if j_count < 2 {
        return Err(Error::InvalidArgument(
            "penalty needs at least 2 dictionary columns (log J)".into(),
        ));
    }
    let scale = (gamma * T::of_usize(j_count).ln()).sqrt();
    let weights = dict
        .norms()
        .iter()
        .map(|&norm| {
            if norm > T::zero() {
                sigma * norm * scale
            } else {
                T::infinity()
            }
        })
        .collect();
    Ok(PenaltyWeights { gamma, sigma, weights })
}

/// A solved functional fit: coefficients, 1-based active column IDs, the
/// penalized objective at the solution, and the fitted bias Fλ.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalFit<T> {
    pub lambda: Vec<T>,
    pub active_set: Vec<usize>,
    pub objective: T,
    pub fitted: Vec<T>,
}

impl<T: Real> FunctionalFit<T> {
    pub fn active_count(&self) -> usize {
        self.active_set.len()
    }
}

/// Penalized objective ‖target − Fλ‖² + 2 Σ w_j |λ_j| evaluated from a
/// residual vector. Pinned columns must hold zero coefficients.
pub fn penalized_objective<T: Real>(
    residual: &[T],
    lambda: &[T],
    weights: &PenaltyWeights<T>,
) -> T {
    let rss = residual.iter().fold(T::zero(), |a, &v| a + v * v);
    let two = T::of(2.0);
    let pen = lambda
        .iter()
        .zip(weights.weights())
        .fold(T::zero(), |a, (&l, &w)| {
            if l == T::zero() {
                a
            } else {
                a + w * l.abs()
            }
        });
    rss + two * pen
}

fn soft_threshold<T: Real>(z: T, w: T) -> T {
    if z > w {
        z - w
    } else if z < -w {
        z + w
    } else {
        T::zero()
    }
}

fn kkt_gap_from_residual<T: Real>(
    dict: &DictionaryMatrix<T>,
    residual: &[T],
    lambda: &[T],
    weights: &PenaltyWeights<T>,
) -> T {
    let mut gap = T::zero();
    for (j, col) in dict.columns().iter().enumerate() {
        if weights.is_pinned(j) {
            continue;
        }
        let g = col.dot(residual);
        let w = weights.weight(j);
        let viol = if lambda[j] != T::zero() {
            let sign = if lambda[j] > T::zero() { T::one() } else { -T::one() };
            (g - sign * w).abs()
        } else {
            (g.abs() - w).max(T::zero())
        };
        gap = gap.max(viol);
    }
    gap
}

/// Maximum KKT violation of a candidate solution; zero at an exact optimum.
pub fn kkt_gap<T: Real>(
    dict: &DictionaryMatrix<T>,
    target: &[T],
    lambda: &[T],
    weights: &PenaltyWeights<T>,
) -> T {
    let fitted = dict.apply(lambda);
    let residual: Vec<T> = target.iter().zip(&fitted).map(|(&t, &f)| t - f).collect();
    kkt_gap_from_residual(dict, &residual, lambda, weights)
}

/// Solves the weighted-ℓ₁ problem with the default sweep cap.
pub fn solve<T: Real>(
    dict: &DictionaryMatrix<T>,
    target: &[T],
    weights: &PenaltyWeights<T>,
    tol: T,
) -> Result<FunctionalFit<T>> {
    solve_with(dict, target, weights, tol, DEFAULT_MAX_SWEEPS, None)
}

pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

/// Full solver entry point with a sweep cap and an optional warm start.
/// Starting coordinate descent from a previous solution never increases the
/// penalized objective, which the alternating procedure relies on.
pub fn solve_with<T: Real>(
    dict: &DictionaryMatrix<T>,
    target: &[T],
    weights: &PenaltyWeights<T>,
    tol: T,
    max_sweeps: usize,
    warm_start: Option<&[T]>,
) -> Result<FunctionalFit<T>> {
    let n = dict.num_rows();
    let j_count = dict.num_columns();
    if target.len() != n {
        return Err(Error::Mismatch(format!(
            "target length {} vs {} dictionary rows",
            target.len(),
            n
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso target contains NaN/inf".into()));
    }
    if weights.len() != j_count {
        return Err(Error::Mismatch("weights/dictionary column mismatch".into()));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }

    let mut lambda = match warm_start {
        Some(w) if w.len() == j_count => w.to_vec(),
        Some(_) => return Err(Error::Mismatch("warm start length mismatch".into())),
        None => vec![T::zero(); j_count],
    };
    for (j, l) in lambda.iter_mut().enumerate() {
        if weights.is_pinned(j) {
            *l = T::zero();
        }
    }

    let norm_sq: Vec<T> = dict.norms().iter().map(|&s| s * s).collect();
    let mut residual = target.to_vec();
    for (j, col) in dict.columns().iter().enumerate() {
        if lambda[j] != T::zero() {
            col.axpy(-lambda[j], &mut residual);
        }
    }

    let target_norm = target.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    let threshold = tol * target_norm;

    let mut converged = false;
    for _ in 0..max_sweeps {
        // one cyclic pass in dictionary ID order
        for (j, col) in dict.columns().iter().enumerate() {
            if weights.is_pinned(j) || norm_sq[j] == T::zero() {
                continue;
            }
            let g = col.dot(&residual);
            let z = g + norm_sq[j] * lambda[j];
            let new = soft_threshold(z, weights.weight(j)) / norm_sq[j];
            if new != lambda[j] {
                col.axpy(lambda[j] - new, &mut residual);
                lambda[j] = new;
            }
        }
        if kkt_gap_from_residual(dict, &residual, &lambda, weights) <= threshold {
            converged = true;
            break;
        }
    }
    if !converged
        && kkt_gap_from_residual(dict, &residual, &lambda, weights) > threshold
    {
        return Err(Error::Numerical(format!(
            "coordinate descent did not reach the KKT tolerance within {max_sweeps} sweeps"
        )));
    }

    let active_set: Vec<usize> = lambda
        .iter()
        .enumerate()
        .filter(|(_, &l)| l != T::zero())
        .map(|(j, _)| j + 1)
        .collect();
    let fitted = dict.apply(&lambda);
    let objective = penalized_objective(&residual, &lambda, weights);
    Ok(FunctionalFit { lambda, active_set, objective, fitted })
}
