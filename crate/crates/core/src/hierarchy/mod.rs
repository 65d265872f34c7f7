//! Hierarchical time-series data model: frames, summation matrices, causal
//! embedding and blocked cross-validation planning.

mod embed;
mod folds;
mod frame;
mod summation;

pub use embed::{hankel_embed, EmbeddingSpec, FeatureSource, Regressor, SamplePair};
pub use folds::{
    build_folds, DayRole, Fold, FoldPlan, FoldRows, Sequence, TestRows, SEQUENCE_DAYS, TEST_DAY,
    TRAIN_DAYS,
};
pub use frame::{CalendarFeature, TimeSeriesFrame};
pub use summation::{aggregate_bottom, build_summation_matrix, Hierarchy};
