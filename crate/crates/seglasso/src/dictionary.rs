//! Construction of the evaluated basis matrix F.
//!
//! A dictionary is declared as a list of [`BasisSpec`]s (Haar spikes on a
//! dyadic grid, Fourier pairs on a fixed period, a Fourier frequency grid,
//! monomials) evaluated on either the time grid or the covariate of every
//! series, concatenated in series order. Column IDs are 1-based and stable:
//! the same specs always produce the same IDs.
//!
//! Columns whose evaluated norm is zero (for example Haar bins containing no
//! sample point) are retained so the ID numbering is preserved, but they are
//! flagged inactive and excluded from optimization.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::series::SeriesSet;

/// Which per-observation sequence a basis family is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Time,
    Covariate,
}

/// A declarative basis family.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisKind<T> {
    /// 2^r indicator spikes of height 2^{r/2}: column k is nonzero where
    /// 2^r x / L − k ∈ (0, 1], for k = 0..2^r − 1. The first bin also
    /// includes x = 0, so every point of [0, L] belongs to exactly one bin.
    Haar { resolution: u32, length: T },
    /// Interleaved sin/cos pairs sin(2πjx/L), cos(2πjx/L), j = 1..=j_max.
    FourierFixed { j_max: usize, length: T },
    /// Frequency grid w_i = i/T with T = max(x) − min(x), one sin/cos pair
    /// per i = 1..⌊T/min_period⌋.
    FourierGrid { min_period: T },
    /// One column x ↦ x^d per degree.
    Monomials { degrees: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec<T> {
    pub kind: BasisKind<T>,
    pub target: Target,
}

impl<T> BasisSpec<T> {
    pub fn on_time(kind: BasisKind<T>) -> Self {
        Self { kind, target: Target::Time }
    }

    pub fn on_covariate(kind: BasisKind<T>) -> Self {
        Self { kind, target: Target::Covariate }
    }
}

/// One evaluated basis column. Spiky families are stored sparse.
#[derive(Debug, Clone, PartialEq)]
pub enum Column<T> {
    Dense(Vec<T>),
    Sparse { len: usize, indices: Vec<u32>, values: Vec<T> },
}

impl<T: Real> Column<T> {
    pub fn len(&self) -> usize {
        match self {
            Column::Dense(v) => v.len(),
            Column::Sparse { len, .. } => *len,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Densified copy of the column.
    pub fn to_dense(&self) -> Vec<T> {
        match self {
            Column::Dense(v) => v.clone(),
            Column::Sparse { len, indices, values } => {
                let mut out = vec![T::zero(); *len];
                for (&i, &v) in indices.iter().zip(values) {
                    out[i as usize] = v;
                }
                out
            }
        }
    }

    pub fn dot(&self, rhs: &[T]) -> T {
        match self {
            Column::Dense(v) => v.iter().zip(rhs).fold(T::zero(), |a, (&x, &y)| a + x * y),
            Column::Sparse { indices, values, .. } => indices
                .iter()
                .zip(values)
                .fold(T::zero(), |a, (&i, &v)| a + v * rhs[i as usize]),
        }
    }

    /// rhs += scale * column
    pub fn axpy(&self, scale: T, rhs: &mut [T]) {
        if scale == T::zero() {
            return;
        }
        match self {
            Column::Dense(v) => {
                for (r, &x) in rhs.iter_mut().zip(v) {
                    *r = *r + scale * x;
                }
            }
            Column::Sparse { indices, values, .. } => {
                for (&i, &v) in indices.iter().zip(values) {
                    rhs[i as usize] = rhs[i as usize] + scale * v;
                }
            }
        }
    }

    pub fn norm_sq(&self) -> T {
        match self {
            Column::Dense(v) => v.iter().fold(T::zero(), |a, &x| a + x * x),
            Column::Sparse { values, .. } => values.iter().fold(T::zero(), |a, &x| a + x * x),
        }
    }

    fn from_dense_compacting(values: Vec<T>) -> Self {
        let nnz = values.iter().filter(|v| **v != T::zero()).count();
        // sparse representation pays off only for genuinely spiky columns
        if nnz * 4 <= values.len() {
            let mut indices = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            for (i, &v) in values.iter().enumerate() {
                if v != T::zero() {
                    indices.push(i as u32);
                    vals.push(v);
                }
            }
            Column::Sparse { len: values.len(), indices, values: vals }
        } else {
            Column::Dense(values)
        }
    }
}

/// The evaluated N × J matrix F with column labels and norms ‖φ_j‖_N.
#[derive(Debug, Clone)]
pub struct DictionaryMatrix<T> {
    n: usize,
    columns: Vec<Column<T>>,
    labels: Vec<String>,
    norms: Vec<T>,
}

impl<T: Real> DictionaryMatrix<T> {
    /// Builds a matrix directly from dense columns, with generated labels.
    /// Mostly useful for tests and ad-hoc designs.
    pub fn from_dense_columns(columns: Vec<Vec<T>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("matrix needs at least one column".into()));
        }
        let n = columns[0].len();
        if n == 0 || columns.iter().any(|c| c.len() != n) {
            return Err(Error::Mismatch("columns must be non-empty and equal-length".into()));
        }
        let labels = (1..=columns.len()).map(|j| format!("col({j})")).collect();
        let columns: Vec<Column<T>> =
            columns.into_iter().map(Column::from_dense_compacting).collect();
        let norms = columns.iter().map(|c| c.norm_sq().sqrt()).collect();
        Ok(Self { n, columns, labels, norms })
    }

    /// Number of rows N.
    pub fn num_rows(&self) -> usize {
        self.n
    }

    /// Number of columns J.
    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column<T>] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &Column<T> {
        &self.columns[idx]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// ‖φ_j‖_N = sqrt(Σ_l φ_j²(X_l)) per column.
    pub fn norms(&self) -> &[T] {
        &self.norms
    }

    /// A column takes part in optimization iff its sampled norm is nonzero.
    pub fn is_active(&self, idx: usize) -> bool {
        self.norms[idx] > T::zero()
    }

    /// Evaluates Fλ.
    pub fn apply(&self, lambda: &[T]) -> Vec<T> {
        assert_eq!(lambda.len(), self.columns.len());
        let mut out = vec![T::zero(); self.n];
        for (col, &l) in self.columns.iter().zip(lambda) {
            col.axpy(l, &mut out);
        }
        out
    }
}

fn format_real<T: Real>(v: T) -> String {
    format!("{}", v.to_f64().unwrap_or(f64::NAN))
}

/// Haar spike columns: 2^r columns of height 2^{r/2}.
pub fn build_haar<T: Real>(resolution: u32, length: T, x: &[T]) -> Result<(Vec<Column<T>>, Vec<String>)> {
    if length <= T::zero() {
        return Err(Error::InvalidArgument("haar domain length must be positive".into()));
    }
    let bins = 1usize << resolution;
    let height = T::of(2.0f64.powf(resolution as f64 / 2.0));
    let bins_t = T::of_usize(bins);
    let mut cols = vec![vec![T::zero(); x.len()]; bins];
    for (i, &xi) in x.iter().enumerate() {
        // multiply before dividing so grid points on bin boundaries
        // (e.g. t = 50 with L = 100) land exactly on an integer
        let pos = xi * bins_t / length;
        // bin k covers (k, k+1] on the scaled axis; x = 0 joins bin 0
        let mut k = pos.ceil().to_f64().unwrap_or(0.0) as i64 - 1;
        if k < 0 {
            k = 0;
        }
        let k = k as usize;
        if k < bins {
            cols[k][i] = height;
        }
    }
    let labels = (0..bins)
        .map(|k| format!("haar(r={resolution},k={k},L={})", format_real(length)))
        .collect();
    Ok((cols.into_iter().map(Column::from_dense_compacting).collect(), labels))
}

/// Interleaved Fourier pairs on a fixed period: sin₁, cos₁, sin₂, cos₂, …
pub fn build_fourier_fixed<T: Real>(
    j_max: usize,
    length: T,
    x: &[T],
) -> Result<(Vec<Column<T>>, Vec<String>)> {
    if j_max < 1 {
        return Err(Error::InvalidArgument("fourier j_max must be at least 1".into()));
    }
    if length <= T::zero() {
        return Err(Error::InvalidArgument("fourier period length must be positive".into()));
    }
    let two_pi = T::of(std::f64::consts::TAU);
    let mut cols = Vec::with_capacity(2 * j_max);
    let mut labels = Vec::with_capacity(2 * j_max);
    for j in 1..=j_max {
        let w = two_pi * T::of_usize(j) / length;
        cols.push(Column::Dense(x.iter().map(|&xi| (w * xi).sin()).collect()));
        labels.push(format!("sin(j={j},L={})", format_real(length)));
        cols.push(Column::Dense(x.iter().map(|&xi| (w * xi).cos()).collect()));
        labels.push(format!("cos(j={j},L={})", format_real(length)));
    }
    Ok((cols, labels))
}

/// Fourier frequency grid: pairs at w_i = i/T for every period T/i of at
/// least `min_period`, T being the span of the sample.
pub fn build_fourier_grid<T: Real>(
    min_period: T,
    x: &[T],
) -> Result<(Vec<Column<T>>, Vec<String>)> {
    if min_period <= T::zero() {
        return Err(Error::InvalidArgument("min_period must be positive".into()));
    }
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for &xi in x {
        lo = lo.min(xi);
        hi = hi.max(xi);
    }
    let span = hi - lo;
    if !(span > T::zero()) {
        return Err(Error::InvalidArgument("degenerate design: zero span".into()));
    }
    let count = (span / min_period).floor().to_f64().unwrap_or(0.0) as usize;
    let two_pi = T::of(std::f64::consts::TAU);
    let mut cols = Vec::with_capacity(2 * count);
    let mut labels = Vec::with_capacity(2 * count);
    for i in 1..=count {
        let w = T::of_usize(i) / span;
        cols.push(Column::Dense(x.iter().map(|&xi| (two_pi * w * xi).sin()).collect()));
        labels.push(format!("sin(i={i}/T,T={})", format_real(span)));
        cols.push(Column::Dense(x.iter().map(|&xi| (two_pi * w * xi).cos()).collect()));
        labels.push(format!("cos(i={i}/T,T={})", format_real(span)));
    }
    Ok((cols, labels))
}

/// Monomial columns x ↦ x^d.
pub fn build_monomials<T: Real>(degrees: &[u32], x: &[T]) -> Result<(Vec<Column<T>>, Vec<String>)> {
    let mut seen = std::collections::HashSet::new();
    for &d in degrees {
        if d == 0 || !seen.insert(d) {
            return Err(Error::InvalidArgument(
                "monomial degrees must be distinct positive integers".into(),
            ));
        }
    }
    let mut cols = Vec::with_capacity(degrees.len());
    let mut labels = Vec::with_capacity(degrees.len());
    for &d in degrees {
        cols.push(Column::Dense(x.iter().map(|&xi| xi.powi(d as i32)).collect()));
        labels.push(format!("monomial(d={d})"));
    }
    Ok((cols, labels))
}

/// Evaluates every spec on the concatenated design of all series (series 1
/// rows first, then series 2, …) and stacks the columns into one matrix.
pub fn assemble<T: Real>(
    specs: &[BasisSpec<T>],
    series_set: &SeriesSet<T>,
) -> Result<DictionaryMatrix<T>> {
    if specs.is_empty() {
        return Err(Error::InvalidArgument("dictionary needs at least one basis spec".into()));
    }
    let times = series_set.flat_times();
    let covariates = series_set.flat_covariates();
    let mut columns = Vec::new();
    let mut labels = Vec::new();
    for spec in specs {
        let x: &[T] = match spec.target {
            Target::Time => &times,
            Target::Covariate => &covariates,
        };
        let (cols, labs) = match &spec.kind {
            BasisKind::Haar { resolution, length } => build_haar(*resolution, *length, x)?,
            BasisKind::FourierFixed { j_max, length } => build_fourier_fixed(*j_max, *length, x)?,
            BasisKind::FourierGrid { min_period } => build_fourier_grid(*min_period, x)?,
            BasisKind::Monomials { degrees } => build_monomials(degrees, x)?,
        };
        columns.extend(cols);
        labels.extend(labs);
    }
    let norms = columns.iter().map(|c| c.norm_sq().sqrt()).collect();
    Ok(DictionaryMatrix { n: times.len(), columns, labels, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{Series, SeriesSet};

    fn grid_1_to_100() -> Vec<f64> {
        (1..=100).map(|t| t as f64).collect()
    }

    fn one_series_set(times: Vec<f64>) -> SeriesSet<f64> {
        let vals = vec![0.0; times.len()];
        SeriesSet::new(vec![Series::new("s", times, vals, None).unwrap()]).unwrap()
    }

    /// The §4.1-style recipe on t = 1..=100: 128 Haar + 20 Fourier + t, t².
    fn recipe_150(set: &SeriesSet<f64>) -> DictionaryMatrix<f64> {
        assemble(
            &[
                BasisSpec::on_time(BasisKind::Haar { resolution: 7, length: 100.0 }),
                BasisSpec::on_time(BasisKind::FourierFixed { j_max: 10, length: 100.0 }),
                BasisSpec::on_time(BasisKind::Monomials { degrees: vec![1, 2] }),
            ],
            set,
        )
        .unwrap()
    }

    #[test]
    fn haar_column_count_and_height() {
        let x = grid_1_to_100();
        let (cols, labels) = build_haar(7, 100.0, &x).unwrap();
        assert_eq!(cols.len(), 128);
        assert_eq!(labels.len(), 128);
        let height = 2.0f64.powf(3.5);
        for col in &cols {
            for v in col.to_dense() {
                assert!(v == 0.0 || (v - height).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn haar_resolution_zero_is_constant_one() {
        let x = vec![0.0, 25.0, 50.0, 100.0];
        let (cols, _) = build_haar(0, 100.0, &x).unwrap();
        assert_eq!(cols.len(), 1);
        assert_eq!(cols[0].to_dense(), vec![1.0; 4]);
    }

    #[test]
    fn haar_spike_ids_match_published_numbering() {
        // the columns supporting t = 10, 50, 60 carry 1-based IDs 13, 64, 77
        let x = grid_1_to_100();
        let (cols, _) = build_haar(7, 100.0, &x).unwrap();
        for (t, id) in [(10usize, 13usize), (50, 64), (60, 77)] {
            let holder = cols
                .iter()
                .position(|c| c.to_dense()[t - 1] != 0.0)
                .unwrap();
            assert_eq!(holder + 1, id, "spike at t={t}");
        }
    }

    #[test]
    fn haar_every_point_in_exactly_one_bin() {
        let x: Vec<f64> = (0..=128).map(|i| i as f64 * 100.0 / 128.0).collect();
        let (cols, _) = build_haar(7, 100.0, &x).unwrap();
        for i in 0..x.len() {
            let hits = cols.iter().filter(|c| c.to_dense()[i] != 0.0).count();
            assert_eq!(hits, 1, "x = {}", x[i]);
        }
    }

    #[test]
    fn haar_supports_are_disjoint() {
        let x = grid_1_to_100();
        let (cols, _) = build_haar(4, 100.0, &x).unwrap();
        let dense: Vec<Vec<f64>> = cols.iter().map(Column::to_dense).collect();
        for a in 0..dense.len() {
            for b in (a + 1)..dense.len() {
                let prod: f64 = dense[a].iter().zip(&dense[b]).map(|(x, y)| x * y).sum();
                assert_eq!(prod, 0.0);
            }
        }
    }

    #[test]
    fn fourier_fixed_values_and_interleaving() {
        let x = grid_1_to_100();
        let (cols, labels) = build_fourier_fixed(10, 100.0, &x).unwrap();
        assert_eq!(cols.len(), 20);
        assert!(labels[8].starts_with("sin(j=5"));
        for (j, pair) in cols.chunks(2).enumerate() {
            let j = j + 1;
            let sin = pair[0].to_dense();
            let cos = pair[1].to_dense();
            for (i, &xi) in x.iter().enumerate() {
                let arg = std::f64::consts::TAU * j as f64 * xi / 100.0;
                assert!((sin[i] - arg.sin()).abs() < 1e-12);
                assert!((cos[i] - arg.cos()).abs() < 1e-12);
            }
        }
        // at x = 0: sin → 0, cos → 1
        let (cols0, _) = build_fourier_fixed(3, 100.0, &[0.0]).unwrap();
        assert_eq!(cols0[0].to_dense(), vec![0.0]);
        assert_eq!(cols0[1].to_dense(), vec![1.0]);
    }

    #[test]
    fn dictionary_position_137_is_sin_j5() {
        let set = one_series_set(grid_1_to_100());
        let dict = recipe_150(&set);
        assert_eq!(dict.num_columns(), 150);
        assert!(dict.labels()[136].starts_with("sin(j=5"));
    }

    #[test]
    fn fourier_grid_counts() {
        // span 904 with min period 8 → 113 pairs, 226 columns
        let x: Vec<f64> = (0..=904).map(|t| t as f64).collect();
        let (cols, _) = build_fourier_grid(8.0, &x).unwrap();
        assert_eq!(cols.len(), 226);
        // min_period beyond the span → no columns
        let (none, _) = build_fourier_grid(2000.0, &x).unwrap();
        assert!(none.is_empty());
        // the i = 1 pair has period exactly T
        let (pair, _) = build_fourier_grid(904.0, &x).unwrap();
        assert_eq!(pair.len(), 2);
        let sin = pair[0].to_dense();
        assert!((sin[0] - sin[904]).abs() < 1e-9);
        assert!(build_fourier_grid(8.0, &[5.0, 5.0]).is_err());
    }

    #[test]
    fn monomials_match_power_oracle() {
        let x = grid_1_to_100();
        let (cols, _) = build_monomials(&[1, 2, 3], &x).unwrap();
        for (ci, d) in cols.iter().zip([1i32, 2, 3]) {
            let dense = ci.to_dense();
            for (i, &xi) in x.iter().enumerate() {
                assert_eq!(dense[i], xi.powi(d));
            }
        }
        let (c0, _) = build_monomials(&[1], &[0.0]).unwrap();
        assert_eq!(c0[0].to_dense(), vec![0.0]);
        assert!(build_monomials(&[2, 2], &x).is_err());
        assert!(build_monomials(&[0], &x).is_err());
    }

    #[test]
    fn assemble_recipe_gives_150_columns_with_stable_labels() {
        let set = one_series_set(grid_1_to_100());
        let a = recipe_150(&set);
        let b = recipe_150(&set);
        assert_eq!(a.num_columns(), 150);
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.labels()[12], "haar(r=7,k=12,L=100)");
    }

    #[test]
    fn assemble_norms_match_direct_oracle() {
        let set = one_series_set((1..=40).map(|t| t as f64).collect());
        let dict = assemble(
            &[BasisSpec::on_time(BasisKind::FourierFixed { j_max: 3, length: 40.0 })],
            &set,
        )
        .unwrap();
        for j in 0..dict.num_columns() {
            let direct: f64 = dict
                .column(j)
                .to_dense()
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            assert!((dict.norms()[j] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_norm_is_sqrt_n() {
        let set = one_series_set(vec![10.0, 20.0, 30.0, 40.0]);
        let dict = assemble(
            &[BasisSpec::on_time(BasisKind::Haar { resolution: 0, length: 40.0 })],
            &set,
        )
        .unwrap();
        assert_eq!(dict.norms()[0], 2.0);
    }

    #[test]
    fn zero_norm_columns_are_retained_but_inactive() {
        let set = one_series_set(grid_1_to_100());
        let dict = recipe_150(&set);
        let inactive: Vec<usize> = (0..dict.num_columns())
            .filter(|&j| !dict.is_active(j))
            .collect();
        // 100 sample points spread over 128 haar bins leave 28 bins empty
        assert_eq!(inactive.len(), 28);
        assert!(inactive.iter().all(|&j| j < 128));
        for &j in &inactive {
            assert_eq!(dict.norms()[j], 0.0);
            assert!(dict.column(j).to_dense().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn fourier_near_orthogonality_on_even_grid() {
        let set = one_series_set(grid_1_to_100());
        let dict = assemble(
            &[BasisSpec::on_time(BasisKind::FourierFixed { j_max: 4, length: 100.0 })],
            &set,
        )
        .unwrap();
        let n = dict.num_rows() as f64;
        for j in 0..4 {
            let sin = dict.column(2 * j).to_dense();
            let cos = dict.column(2 * j + 1).to_dense();
            let dot: f64 = sin.iter().zip(&cos).map(|(a, b)| a * b).sum();
            assert!(dot.abs() <= 1e-6 * n);
        }
    }

    #[test]
    fn covariate_target_uses_covariates() {
        let times: Vec<f64> = (1..=10).map(|t| t as f64).collect();
        let cov: Vec<f64> = times.iter().map(|t| t * t).collect();
        let set = SeriesSet::new(vec![
            Series::new("s", times.clone(), vec![0.0; 10], Some(cov.clone())).unwrap(),
        ])
        .unwrap();
        let dict = assemble(
            &[BasisSpec::on_covariate(BasisKind::Monomials { degrees: vec![1] })],
            &set,
        )
        .unwrap();
        assert_eq!(dict.column(0).to_dense(), cov);
    }
}
