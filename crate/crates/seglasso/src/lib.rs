//! Joint segmentation of multiple series sharing a functional bias.
//!
//! The model is y_m(t) = μ_m(t) + f(x_m(t)) + e_m(t): each series has its own
//! piecewise-constant mean while all series share one bias function f. The
//! estimator alternates exact dynamic-programming segmentation with a
//! weighted-Lasso fit of f over a function dictionary, and the total number
//! of segments is chosen by a modified BIC.
//!
//! Numeric code is generic over the scalar type through [`scalar::Real`]
//! (any `num_traits::Float`, in practice `f32` or `f64`); the aliases below
//! fix `f64` for the common case. The simulation harness in [`sim`] is
//! concrete `f64`.

pub mod dictionary;
pub mod dp;
pub mod error;
pub mod fit;
pub mod lasso;
pub mod scalar;
pub mod selection;
pub mod series;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` aliases for the main entry points.
pub type Series64 = series::Series<f64>;
pub type SeriesSet64 = series::SeriesSet<f64>;
pub type Segmentation64 = series::Segmentation<f64>;
pub type DictionaryMatrix64 = dictionary::DictionaryMatrix<f64>;
pub type BasisSpec64 = dictionary::BasisSpec<f64>;
pub type FitConfig64 = fit::FitConfig<f64>;
pub type ModelFit64 = fit::ModelFit<f64>;
pub type SelectionResult64 = selection::SelectionResult<f64>;
