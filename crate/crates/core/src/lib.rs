//! Out-of-distribution scoring with an upper bound on the overlap index.
//!
//! The main entry points are [`detector::fit`], which summarizes an
//! in-distribution sample, and [`detector::score`], which turns a candidate
//! into a confidence score in `[-0.5, 1]` (high means in-distribution).

pub mod accuracy;
pub mod bench;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod synth;

pub use detector::{
    classify, compute_bound, contaminated_center, fit, score, score_batch, IdSummary, Label,
    ScoreReport,
};
pub use error::{Error, ErrorClass, Result};
pub use geometry::{FeatureMatrix, FeatureVector, NormKind, ShellPartition};
