//! Loads or synthesizes the measurements and builds the hierarchy.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use chrono::Duration;
use hierload::hierarchy::Hierarchy;
use hierload::ingestion::{
    align_nwp, clean_meters, generate_synthetic_with, CleaningReport, NwpTable, RawMeterTable, SyntheticSpec,
};
use hierload::forecasters::derive_seed;
use hierload::Frame64;

use crate::config::{BenchmarkConfig, DataSource};

/// Frame holding every series of the hierarchy (aggregates included) and
/// the aligned weather columns.
pub struct PreparedData {
    pub frame: Frame64,
    pub hierarchy: Hierarchy,
    /// All series in `S` row order, top first.
    pub series: Vec<String>,
    pub bottom: Vec<String>,
    pub cleaning: Option<CleaningReport>,
}

impl PreparedData {
    pub fn top(&self) -> &str {
        &self.series[0]
    }
}

pub fn synthetic_spec(cfg: &BenchmarkConfig) -> Option<SyntheticSpec> {
    match &cfg.data {
        DataSource::Synthetic(s) => Some(SyntheticSpec {
            n_bottom: s.n_bottom,
            days: s.days,
            seed: derive_seed(cfg.seed, 0x5eed, 0),
            noise_amplitude: s.noise_amplitude,
            mean_kw: s.mean_kw,
            ..SyntheticSpec::default()
        }),
        DataSource::Dataset(_) => None,
    }
}

pub fn prepare_data(cfg: &BenchmarkConfig) -> Result<PreparedData> {
    let hierarchy = Hierarchy::build(cfg.data.n_bottom(), &cfg.hierarchy.group_counts)?;
    let (mut frame, bottom, cleaning) = match &cfg.data {
        DataSource::Synthetic(s) => {
            let spec = synthetic_spec(cfg).expect("synthetic source");
            let (mut frame, nwp) = generate_synthetic_with::<f64>(&spec)?;
            let bottom = frame.names().to_vec();
            let aligned = align_nwp(
                &nwp,
                frame.start(),
                frame.len(),
                frame.step_minutes(),
                Duration::hours(s.nwp_min_lead_hours),
            )?;
            aligned.add_to_frame(&mut frame)?;
            (frame, bottom, None)
        }
        DataSource::Dataset(d) => {
            let file = File::open(&d.meters).with_context(|| format!("opening {}", d.meters.display()))?;
            let raw = RawMeterTable::<f64>::from_csv(BufReader::new(file), d.step_minutes)
                .with_context(|| format!("reading {}", d.meters.display()))?;
            let (mut frame, report) = clean_meters(raw, &d.cleaning)?;
            let bottom: Vec<String> = match &d.meter_ids {
                Some(ids) => ids.clone(),
                None => {
                    let kept = report.retained();
                    if kept.len() < d.n_bottom {
                        anyhow::bail!(hierload::Error::Data(format!(
                            "{} meters retained after cleaning, {} requested",
                            kept.len(),
                            d.n_bottom
                        )));
                    }
                    kept[..d.n_bottom].iter().map(|s| s.to_string()).collect()
                }
            };
            if let Some(path) = &d.nwp {
                let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
                let nwp = NwpTable::<f64>::from_csv(BufReader::new(file))
                    .with_context(|| format!("reading {}", path.display()))?;
                let aligned = align_nwp(
                    &nwp,
                    frame.start(),
                    frame.len(),
                    frame.step_minutes(),
                    Duration::hours(d.nwp_min_lead_hours),
                )?;
                aligned.add_to_frame(&mut frame)?;
            }
            (frame, bottom, Some(report))
        }
    };
    let series = frame.add_aggregates(&hierarchy, &bottom)?;
    Ok(PreparedData { frame, hierarchy, series, bottom, cleaning })
}

/// Writes `columns` of `frame` as a wide CSV with UTC timestamps first.
pub fn write_frame_csv(frame: &Frame64, columns: &[String], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header)?;
    let cols: Vec<&[f64]> = columns.iter().map(|c| frame.column(c)).collect::<hierload::Result<_>>()?;
    for i in 0..frame.len() {
        let mut rec = vec![frame.timestamp(i).format("%Y-%m-%dT%H:%M:%SZ").to_string()];
        rec.extend(cols.iter().map(|c| c[i].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes weather forecasts as `valid,issue,<variables…>`.
pub fn write_nwp_csv(nwp: &NwpTable<f64>, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(f, "valid,issue,{}", nwp.variables.join(","))?;
    for r in &nwp.records {
        let vals: Vec<String> = r.values.iter().map(f64::to_string).collect();
        writeln!(
            f,
            "{},{},{}",
            r.valid.format("%Y-%m-%dT%H:%M:%SZ"),
            r.issue.format("%Y-%m-%dT%H:%M:%SZ"),
            vals.join(",")
        )?;
    }
    f.flush()?;
    Ok(())
}
