//! Hierarchical probabilistic load forecasting: time-series embedding and
//! blocked cross-validation, base forecasters with quantile fans,
//! forecast reconciliation and KPI evaluation.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below name the common instantiations.

pub mod error;
pub mod evaluation;
pub mod forecasters;
pub mod hierarchy;
pub mod ingestion;
pub mod linalg;
pub mod reconciliation;
pub mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Frame64 = hierarchy::TimeSeriesFrame<f64>;
pub type Frame32 = hierarchy::TimeSeriesFrame<f32>;
pub type ForecastResult64 = forecasters::ForecastResult<f64>;
pub type ForecastResult32 = forecasters::ForecastResult<f32>;
pub type SeriesForecast64 = forecasters::SeriesForecast<f64>;
pub type SeriesForecast32 = forecasters::SeriesForecast<f32>;
