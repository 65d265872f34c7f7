//! Mean-score tables over a hierarchy and comparisons between methods.

use serde::{Deserialize, Serialize};

use super::kpi::KpiMatrix;

/// Mean scores of one method: the top series and the average over bottom series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub aggregate_mape: Option<f64>,
    pub aggregate_rmse: Option<f64>,
    pub bottom_mape: Option<f64>,
    pub bottom_rmse: Option<f64>,
}

impl SummaryRow {
    pub fn cells(&self) -> [Option<f64>; 4] {
        [self.aggregate_mape, self.aggregate_rmse, self.bottom_mape, self.bottom_rmse]
    }
}

pub const SUMMARY_COLUMNS: [&str; 4] = ["aggregate_mape", "aggregate_rmse", "bottom_mape", "bottom_rmse"];

fn grand_mean(maps: &[&KpiMatrix]) -> Option<f64> {
    let means: Vec<f64> = maps.iter().filter_map(|m| m.mean()).collect();
    (!means.is_empty()).then(|| means.iter().sum::<f64>() / means.len() as f64)
}

/// Builds one row from the top-series maps and the bottom-series maps.
pub fn summary_row(
    method: &str,
    top_mape: &KpiMatrix,
    top_rmse: &KpiMatrix,
    bottom_mape: &[&KpiMatrix],
    bottom_rmse: &[&KpiMatrix],
) -> SummaryRow {
    SummaryRow {
        method: method.to_string(),
        aggregate_mape: top_mape.mean(),
        aggregate_rmse: top_rmse.mean(),
        bottom_mape: grand_mean(bottom_mape),
        bottom_rmse: grand_mean(bottom_rmse),
    }
}

/// Per-column ranking of methods (lower is better, missing values last).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub columns: Vec<String>,
    /// `ranks[column][position]` = method name, best first.
    pub ranks: Vec<Vec<String>>,
    /// Columns whose best value is shared by more than one method.
    pub ties: Vec<String>,
    /// Method that is strictly best in every column, if any.
    pub overall_winner: Option<String>,
}

pub fn compare_forecasters(rows: &[SummaryRow]) -> Ranking {
    let mut ranks = Vec::new();
    let mut ties = Vec::new();
    let mut winners: Vec<Option<&str>> = Vec::new();
    for (c, name) in SUMMARY_COLUMNS.iter().enumerate() {
        let mut order: Vec<&SummaryRow> = rows.iter().collect();
        let key = |r: &SummaryRow| r.cells()[c].unwrap_or(f64::INFINITY);
        order.sort_by(|a, b| key(a).total_cmp(&key(b)));
        let tied = order.len() > 1 && key(order[0]) == key(order[1]);
        if tied {
            ties.push(name.to_string());
        }
        winners.push((!tied).then(|| order.first().map(|r| r.method.as_str())).flatten());
        ranks.push(order.iter().map(|r| r.method.clone()).collect());
    }
    let overall_winner = match winners.first() {
        Some(Some(w)) if winners.iter().all(|x| x == &Some(*w)) => Some(w.to_string()),
        _ => None,
    };
    Ranking { columns: SUMMARY_COLUMNS.iter().map(|s| s.to_string()).collect(), ranks, ties, overall_winner }
}
