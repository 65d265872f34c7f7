//! Coherent reconciliation of base forecasts across the hierarchy.

mod covariance;
mod cv;
mod methods;

pub use covariance::{
    default_glasso_penalty, ensure_positive_definite, estimate_graphical_lasso, estimate_ledoit_wolf,
    graphical_lasso, sample_covariance, CovarianceEstimate, CovarianceMethod, GlassoOptions,
};
pub use cv::{reconcile_cv, CovarianceScope, ReconciledCv, ReconciliationConfig};
pub use methods::{
    bayes_projection, mint_projection, ols_projection, reconcile_bayes, reconcile_mint, reconcile_ols, Projection,
    ReconciledForecastSet, ReconciliationMethod,
};
