//! Report tree: the summary table, the ranking and one CSV per figure,
//! all rendered from a [`SummaryReport`] with no other input.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::summary::{MapCell, SeriesKpis, SummaryReport};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_profiles<'a>(series: impl Iterator<Item = &'a Vec<Option<f64>>>, len: usize) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; len];
    let mut n = vec![0usize; len];
    for p in series {
        for (j, v) in p.iter().enumerate().take(len) {
            if let Some(v) = v {
                sum[j] += v;
                n[j] += 1;
            }
        }
    }
    sum.iter().zip(&n).map(|(&s, &n)| (n > 0).then(|| s / n as f64)).collect()
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn csv(&mut self, name: &str, header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
        self.files.push(path);
        Ok(())
    }
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

fn map_rows(name: &str, cells: &[MapCell], rows: &mut Vec<Vec<String>>) {
    for c in cells {
        rows.push(vec![
            name.to_string(),
            c.step_of_day.to_string(),
            c.step_ahead.to_string(),
            c.value.to_string(),
            u8::from(c.value >= 1.0).to_string(),
        ]);
    }
}

/// Writes every report file into `dir` and returns their paths.
pub fn write_report(s: &SummaryReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut out = Out { dir: dir.to_path_buf(), files: Vec::new() };

    let mut cols = vec!["method"];
    cols.extend(hierload::evaluation::SUMMARY_COLUMNS);
    let rows = s
        .table
        .iter()
        .map(|r| std::iter::once(r.method.clone()).chain(r.cells().into_iter().map(opt)).collect())
        .collect();
    out.csv("summary_table.csv", &header(&cols), rows)?;

    let mut rows = Vec::new();
    for (c, order) in s.ranking.columns.iter().zip(&s.ranking.ranks) {
        let tied = s.ranking.ties.contains(c);
        for (i, m) in order.iter().enumerate() {
            rows.push(vec![c.clone(), (i + 1).to_string(), m.clone(), u8::from(tied && i == 0).to_string()]);
        }
    }
    if let Some(w) = &s.ranking.overall_winner {
        rows.push(vec!["all".into(), "1".into(), w.clone(), "0".into()]);
    }
    out.csv("ranking.csv", &header(&["column", "rank", "method", "tied"]), rows)?;

    // Example day-ahead forecast of the top series with its quantile fan.
    let mut cols = header(&["forecaster", "step_ahead", "observed", "point"]);
    cols.extend(s.alphas.iter().map(|a| format!("q{a}")));
    let mut rows = Vec::new();
    for f in &s.forecasters {
        if let Some(ex) = &f.top_example {
            for j in 0..ex.point.len() {
                let mut r = vec![f.name.clone(), (j + 1).to_string(), ex.observed[j].to_string(), ex.point[j].to_string()];
                r.extend(ex.quantiles.iter().map(|q| q[j].to_string()));
                rows.push(r);
            }
        }
    }
    out.csv("fig3_example_forecast.csv", &cols, rows)?;

    let map_cols = header(&["forecaster", "step_of_day", "step_ahead", "value", "not_better"]);
    let mut nmape = Vec::new();
    let mut nrmse = Vec::new();
    for f in &s.forecasters {
        map_rows(&f.name, &f.top_nmape_map, &mut nmape);
        map_rows(&f.name, &f.top_nrmse_map, &mut nrmse);
    }
    out.csv("fig4_top_nmape_map.csv", &map_cols, nmape)?;
    out.csv("fig5_top_nrmse_map.csv", &map_cols, nrmse)?;

    let mut rows = Vec::new();
    for f in &s.forecasters {
        let top = f.top();
        let bottom: Vec<&SeriesKpis> = f.bottom().collect();
        let b_rmse = mean_profiles(bottom.iter().map(|k| &k.nrmse_profile), s.horizon);
        let b_mape = mean_profiles(bottom.iter().map(|k| &k.nmape_profile), s.horizon);
        for j in 0..s.horizon {
            rows.push(vec![
                f.name.clone(),
                (j + 1).to_string(),
                opt(top.nrmse_profile.get(j).copied().flatten()),
                opt(top.nmape_profile.get(j).copied().flatten()),
                opt(b_rmse[j]),
                opt(b_mape[j]),
            ]);
        }
    }
    out.csv(
        "fig6_horizon_profiles.csv",
        &header(&["forecaster", "step_ahead", "top_nrmse", "top_nmape", "bottom_nrmse", "bottom_nmape"]),
        rows,
    )?;

    let mut per_step = Vec::new();
    let mut per_alpha = Vec::new();
    for f in &s.forecasters {
        let top = f.top();
        for (j, (q, nq)) in top.qs_per_step.iter().zip(&top.nqs_per_step).enumerate() {
            per_step.push(vec![f.name.clone(), (j + 1).to_string(), q.to_string(), opt(*nq)]);
        }
        for (a, l) in s.alphas.iter().zip(&top.mean_loss) {
            per_alpha.push(vec![f.name.clone(), a.to_string(), l.to_string()]);
        }
    }
    out.csv("fig7_quantile_score_per_step.csv", &header(&["forecaster", "step_ahead", "qs", "nqs"]), per_step)?;
    out.csv("fig7_loss_per_alpha.csv", &header(&["forecaster", "alpha", "mean_loss"]), per_alpha)?;

    let step_hours = s.step_minutes as f64 / 60.0;
    let bin_cols = header(&["method", "series", "level", "bin_start_hour", "bin_end_hour", "reduction"]);
    let mut bottom_bins = Vec::new();
    let mut upper_bins = Vec::new();
    for r in &s.reconciliation {
        for sr in &r.series {
            let rows = if sr.bottom { &mut bottom_bins } else { &mut upper_bins };
            for (b, v) in sr.binned.iter().enumerate() {
                let start = (b * s.bin_steps) as f64 * step_hours;
                let end = (((b + 1) * s.bin_steps).min(s.horizon)) as f64 * step_hours;
                rows.push(vec![
                    r.label.clone(),
                    sr.series.clone(),
                    sr.level.to_string(),
                    start.to_string(),
                    end.to_string(),
                    opt(*v),
                ]);
            }
        }
    }
    out.csv("fig8_bottom_reduction_bins.csv", &bin_cols, bottom_bins)?;
    out.csv("fig9_upper_reduction_bins.csv", &bin_cols, upper_bins)?;

    let mut rows = Vec::new();
    for r in &s.reconciliation {
        let hier = r.hierarchy_per_step();
        for (j, (m, t)) in hier.iter().zip(&r.top().per_step).enumerate() {
            rows.push(vec![r.label.clone(), (j + 1).to_string(), opt(*m), opt(*t)]);
        }
    }
    out.csv("fig10_reduction_per_step.csv", &header(&["method", "step_ahead", "hierarchy_mean", "top"]), rows)?;

    let mut cols = vec!["method"];
    cols.extend(hierload::evaluation::SUMMARY_COLUMNS);
    cols.extend(["top_reduction", "bottom_mean_reduction", "top_qs"]);
    let rows = s
        .reconciliation
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(r.summary.cells().into_iter().map(opt));
            row.push(opt(r.top().mean_reduction));
            row.push(opt(r.bottom_mean_reduction()));
            row.push(r.qs.first().map(|q| q.to_string()).unwrap_or_default());
            row
        })
        .collect();
    out.csv("reconciliation_summary.csv", &header(&cols), rows)?;

    Ok(out.files)
}
