//! Point and probabilistic forecasters evaluated under blocked
//! cross-validation.

mod armax;
mod cv;
mod detrend;
mod holt_winters;
mod knn;
mod persistence;
mod quantiles;
mod trees;

pub use armax::{fit_armax_segment, is_stable, ArmaxConfig, ArmaxEnsemble, ArmaxModel};
pub use cv::{
    armax_exog, derive_seed, run_forecaster_cv, CvInput, ForecasterConfig, SeriesForecast, TrainResiduals,
    GHI_COLUMN, TEMPERATURE_COLUMN,
};
pub use detrend::{fit_detrend, DetrendModel};
pub use holt_winters::{fit_holt_winters, HwConfig, HwParams, HwState, Smoothing, WeeklyDecay};
pub use knn::{fit_knn, KnnConfig, KnnModel, Neighbours, Standardizer};
pub use persistence::persistence_forecast;
pub use quantiles::{
    empirical_quantiles, repair_crossings, sorted_quantile, weighted_quantiles, ErrorBank, ForecastResult,
    QuantileGrid,
};
pub use trees::{fit_boosted_trees, BinnedFeatures, BoostedTreesModel, BoostedTreesSet, Node, Tree, TreesConfig};
