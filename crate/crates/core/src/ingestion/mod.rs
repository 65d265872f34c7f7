//! Loading and cleaning of meter and weather data, and a synthetic
//! stand-in dataset.

mod nwp;
mod pchip;
mod raw;
mod synthetic;

pub use nwp::{align_nwp, NwpRecord, NwpTable};
pub use pchip::{fill_gaps_pchip, FilledSeries, Pchip};
pub use raw::{
    apply_sign_corrections, clean_meters, detect_sign_flips, negate_segment, select_meters, CleaningOptions,
    CleaningReport, CorrectionDirection, MeterReport, MeterSeries, RawMeterTable, SignCorrection,
};
pub use synthetic::{generate_synthetic, generate_synthetic_with, SyntheticSpec};
