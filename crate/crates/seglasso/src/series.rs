//! Data model for multi-series observations and piecewise-constant
//! segmentations.
//!
//! A [`SeriesSet`] holds M observed series; a [`Segmentation`] assigns each
//! series a partition of its index range `1..=n_m` into segments, each with a
//! constant mean. Segment k of a series covers the half-open index interval
//! `(end[k-1], end[k]]`, with `end` holding the 1-based index of the *last*
//! observation of each segment. The final end is always `n_m` and is
//! structural rather than a detected breakpoint.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One observed series: a strictly increasing time grid, values, and a
/// covariate sequence (defaults to the times).
#[derive(Debug, Clone, PartialEq)]
pub struct Series<T> {
    pub id: String,
    pub times: Vec<T>,
    pub values: Vec<T>,
    pub covariates: Vec<T>,
}

impl<T: Real> Series<T> {
    pub fn new(
        id: impl Into<String>,
        times: Vec<T>,
        values: Vec<T>,
        covariates: Option<Vec<T>>,
    ) -> Result<Self> {
        let id = id.into();
        if times.is_empty() {
            return Err(Error::Mismatch(format!("series '{id}' has no observations")));
        }
        if values.len() != times.len() {
            return Err(Error::Mismatch(format!(
                "series '{id}': {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        let covariates = covariates.unwrap_or_else(|| times.clone());
        if covariates.len() != times.len() {
            return Err(Error::Mismatch(format!(
                "series '{id}': {} times but {} covariates",
                times.len(),
                covariates.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Mismatch(format!(
                    "series '{id}': times not strictly increasing"
                )));
            }
        }
        for v in times.iter().chain(values.iter()).chain(covariates.iter()) {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("series '{id}' contains {v}")));
            }
        }
        Ok(Self { id, times, values, covariates })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The M observed series. Invariants are enforced at construction: M ≥ 1,
/// every series non-empty, all entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSet<T> {
    series: Vec<Series<T>>,
}

impl<T: Real> SeriesSet<T> {
    pub fn new(series: Vec<Series<T>>) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::Mismatch("a series set needs at least one series".into()));
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &[Series<T>] {
        &self.series
    }

    /// M, the number of series.
    pub fn num_series(&self) -> usize {
        self.series.len()
    }

    /// N, the total number of observations.
    pub fn total_len(&self) -> usize {
        self.series.iter().map(Series::len).sum()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.series.iter().map(Series::len).collect()
    }

    /// Values concatenated in series order (the vector Y).
    pub fn flat_values(&self) -> Vec<T> {
        self.series.iter().flat_map(|s| s.values.iter().copied()).collect()
    }

    /// Times concatenated in series order.
    pub fn flat_times(&self) -> Vec<T> {
        self.series.iter().flat_map(|s| s.times.iter().copied()).collect()
    }

    /// Covariates concatenated in series order (the design X).
    pub fn flat_covariates(&self) -> Vec<T> {
        self.series.iter().flat_map(|s| s.covariates.iter().copied()).collect()
    }

    pub fn value_slices(&self) -> Vec<&[T]> {
        self.series.iter().map(|s| s.values.as_slice()).collect()
    }
}

/// Segments of one series: `ends[k]` is the 1-based index of the last
/// observation of segment k; `means[k]` its fitted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSegments<T> {
    pub ends: Vec<usize>,
    pub means: Vec<T>,
}

impl<T: Real> SeriesSegments<T> {
    pub fn new(ends: Vec<usize>, means: Vec<T>) -> Result<Self> {
        if ends.is_empty() {
            return Err(Error::Mismatch("a series needs at least one segment".into()));
        }
        if ends.len() != means.len() {
            return Err(Error::Mismatch(format!(
                "{} segment ends but {} means",
                ends.len(),
                means.len()
            )));
        }
        if ends[0] == 0 {
            return Err(Error::Mismatch("segment ends are 1-based".into()));
        }
        for w in ends.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Mismatch("segment ends not strictly increasing".into()));
            }
        }
        Ok(Self { ends, means })
    }

    /// n_m: the index of the last observation.
    pub fn len(&self) -> usize {
        *self.ends.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_segments(&self) -> usize {
        self.ends.len()
    }

    /// Detected breakpoints: all segment ends except the structural last one.
    pub fn internal_breakpoints(&self) -> &[usize] {
        &self.ends[..self.ends.len() - 1]
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        let mut prev = 0usize;
        self.ends
            .iter()
            .map(|&e| {
                let l = e - prev;
                prev = e;
                l
            })
            .collect()
    }
}

/// Per-series breakpoints and segment means for all M series.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation<T> {
    per_series: Vec<SeriesSegments<T>>,
}

impl<T: Real> Segmentation<T> {
    pub fn new(per_series: Vec<SeriesSegments<T>>) -> Result<Self> {
        if per_series.is_empty() {
            return Err(Error::Mismatch("a segmentation needs at least one series".into()));
        }
        Ok(Self { per_series })
    }

    pub fn per_series(&self) -> &[SeriesSegments<T>] {
        &self.per_series
    }

    pub fn per_series_mut(&mut self) -> &mut [SeriesSegments<T>] {
        &mut self.per_series
    }

    pub fn num_series(&self) -> usize {
        self.per_series.len()
    }

    /// K, the total number of segments across all series.
    pub fn total_segments(&self) -> usize {
        self.per_series.iter().map(SeriesSegments::num_segments).sum()
    }

    pub fn total_len(&self) -> usize {
        self.per_series.iter().map(SeriesSegments::len).sum()
    }

    /// Segment lengths of all series, concatenated in series order.
    pub fn all_segment_lengths(&self) -> Vec<usize> {
        self.per_series.iter().flat_map(|s| s.segment_lengths()).collect()
    }

    /// Breakpoint ends per series (including the structural last index).
    pub fn breakpoint_lists(&self) -> Vec<Vec<usize>> {
        self.per_series.iter().map(|s| s.ends.clone()).collect()
    }
}

/// Least-squares means for fixed breakpoints: each segment mean is the
/// arithmetic average of the values it covers.
pub fn fit_means<T: Real>(breaks: &[Vec<usize>], values: &[&[T]]) -> Result<Segmentation<T>> {
    if breaks.len() != values.len() {
        return Err(Error::Mismatch(format!(
            "{} breakpoint lists but {} series",
            breaks.len(),
            values.len()
        )));
    }
    let mut per_series = Vec::with_capacity(breaks.len());
    for (ends, vals) in breaks.iter().zip(values) {
        if ends.last() != Some(&vals.len()) {
            return Err(Error::Mismatch(format!(
                "last segment end {:?} must equal the series length {}",
                ends.last(),
                vals.len()
            )));
        }
        let mut means = Vec::with_capacity(ends.len());
        let mut start = 0usize;
        for &end in ends {
            if end <= start || end > vals.len() {
                return Err(Error::Mismatch("invalid segment end".into()));
            }
            let seg = &vals[start..end];
            let sum = seg.iter().fold(T::zero(), |a, &v| a + v);
            means.push(sum / T::of_usize(seg.len()));
            start = end;
        }
        per_series.push(SeriesSegments::new(ends.clone(), means)?);
    }
    Segmentation::new(per_series)
}

/// Materializes the segmentation part Tμ as a per-observation vector of
/// length N: observation i gets the mean of its containing segment.
pub fn segmentation_signal<T: Real>(seg: &Segmentation<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(seg.total_len());
    for s in seg.per_series() {
        let mut start = 0usize;
        for (&end, &mean) in s.ends.iter().zip(&s.means) {
            out.extend(std::iter::repeat(mean).take(end - start));
            start = end;
        }
    }
    out
}

/// Elementwise residual Y − Tμ − Fλ; omitted parts are treated as zero.
pub fn residual<T: Real>(
    y: &[T],
    seg_signal: Option<&[T]>,
    bias: Option<&[T]>,
) -> Result<Vec<T>> {
    for part in [seg_signal, bias].into_iter().flatten() {
        if part.len() != y.len() {
            return Err(Error::Mismatch(format!(
                "residual parts of length {} vs {}",
                part.len(),
                y.len()
            )));
        }
    }
    let mut out = y.to_vec();
    if let Some(s) = seg_signal {
        for (o, &v) in out.iter_mut().zip(s) {
            *o = *o - v;
        }
    }
    if let Some(b) = bias {
        for (o, &v) in out.iter_mut().zip(b) {
            *o = *o - v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn seg_from(ends: Vec<usize>, means: Vec<f64>) -> Segmentation<f64> {
        Segmentation::new(vec![SeriesSegments::new(ends, means).unwrap()]).unwrap()
    }

    #[test]
    fn fit_means_exact_segment_constants() {
        let vals: &[f64] = &[1.0, 1.0, 3.0, 3.0];
        let seg = fit_means(&[vec![2, 4]], &[vals]).unwrap();
        assert_eq!(seg.per_series()[0].means, vec![1.0, 3.0]);
    }

    #[test]
    fn fit_means_single_segment_is_global_average() {
        let vals: &[f64] = &[1.0, 2.0, 3.0, 6.0];
        let seg = fit_means(&[vec![4]], &[vals]).unwrap();
        assert_eq!(seg.per_series()[0].means, vec![3.0]);
    }

    #[test]
    fn fit_means_matches_direct_averaging_oracle() {
        // fixed pseudo-random series of length 10, breakpoints {3, 7, 10}
        let vals: Vec<f64> = (0..10).map(|i| ((i * 37 + 11) % 17) as f64 / 3.0).collect();
        let ends = vec![3usize, 7, 10];
        let seg = fit_means(&[ends.clone()], &[&vals]).unwrap();
        let mut start = 0;
        for (k, &end) in ends.iter().enumerate() {
            let m: f64 = vals[start..end].iter().sum::<f64>() / (end - start) as f64;
            assert!((seg.per_series()[0].means[k] - m).abs() < 1e-12);
            start = end;
        }
    }

    #[test]
    fn fit_means_rejects_mismatched_lengths() {
        let vals: &[f64] = &[1.0, 2.0];
        assert!(fit_means(&[vec![3]], &[vals]).is_err());
        assert!(fit_means(&[vec![2], vec![2]], &[vals]).is_err());
    }

    #[test]
    fn signal_reconstruction() {
        let seg = seg_from(vec![2, 4], vec![1.0, 3.0]);
        assert_eq!(segmentation_signal(&seg), vec![1.0, 1.0, 3.0, 3.0]);
        let zero = seg_from(vec![3], vec![0.0]);
        assert_eq!(segmentation_signal(&zero), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn residual_cases() {
        let y = [1.0, 1.0, 3.0, 3.0];
        let seg = seg_from(vec![2, 4], vec![1.0, 3.0]);
        let sig = segmentation_signal(&seg);
        assert_eq!(residual(&y, Some(&sig), None).unwrap(), vec![0.0; 4]);
        let bias = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(
            residual(&y, None, Some(&bias)).unwrap(),
            vec![0.5, 0.5, 2.5, 2.5]
        );
        assert!(residual(&y, Some(&[1.0]), None).is_err());
    }

    #[test]
    fn series_validation() {
        assert!(Series::new("a", vec![1.0, 1.0], vec![0.0, 0.0], None).is_err());
        assert!(Series::new("a", vec![1.0, 2.0], vec![0.0, f64::NAN], None).is_err());
        assert!(Series::new("a", vec![1.0, 2.0], vec![0.0], None).is_err());
        assert!(Series::<f64>::new("a", vec![], vec![], None).is_err());
    }

    proptest! {
        // Perturbing any fitted mean never decreases the sum of squares.
        #[test]
        fn fitted_means_minimize_sum_of_squares(
            vals in proptest::collection::vec(-10.0f64..10.0, 4..20),
            cut in 1usize..3,
        ) {
            let n = vals.len();
            let ends = if cut < n { vec![cut, n] } else { vec![n] };
            let seg = fit_means(&[ends], &[vals.as_slice()]).unwrap();
            let base = segmentation_signal(&seg);
            let ss = |sig: &[f64]| -> f64 {
                vals.iter().zip(sig).map(|(y, s)| (y - s) * (y - s)).sum()
            };
            let ss0 = ss(&base);
            for (k, &end) in seg.per_series()[0].ends.iter().enumerate() {
                for delta in [1e-3, -1e-3] {
                    let mut sig = base.clone();
                    let start = if k == 0 { 0 } else { seg.per_series()[0].ends[k - 1] };
                    for s in &mut sig[start..end] {
                        *s += delta;
                    }
                    prop_assert!(ss(&sig) >= ss0 - 1e-12);
                }
            }
        }

        // Re-fitting means on the reconstructed signal returns the same means.
        #[test]
        fn fit_means_idempotent_on_reconstruction(
            vals in proptest::collection::vec(-10.0f64..10.0, 5..15),
        ) {
            let n = vals.len();
            let ends = vec![n / 2, n];
            let seg = fit_means(&[ends.clone()], &[vals.as_slice()]).unwrap();
            let sig = segmentation_signal(&seg);
            let refit = fit_means(&[ends], &[sig.as_slice()]).unwrap();
            // re-averaging k copies of μ can differ by accumulation ulps
            for (a, b) in seg.per_series()[0].means.iter().zip(&refit.per_series()[0].means) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }
    }
}
