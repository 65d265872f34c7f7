//! KPI maps, quantile scores and mean-score tables.

mod kpi;
mod scores;
mod summary;

pub use kpi::{binned_reduction, mape_map, qs_map, relative_reduction, rmse_map, KpiMatrix, Metric};
pub use scores::{
    coverage, pinball_loss, quantile_score, quantile_score_of_fan, score_result, trapezoid_weights,
    QuantileScoreReport,
};
pub use summary::{compare_forecasters, summary_row, Ranking, SummaryRow, SUMMARY_COLUMNS};

/// Default MAPE small-denominator floor in kW.
pub const MAPE_FLOOR: f64 = 0.1;
