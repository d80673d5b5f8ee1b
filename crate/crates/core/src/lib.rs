//! Online accuracy estimation for crowdsourced annotations.
//!
//! Workers' competences are learned from how much their labels agree with
//! co-workers' labels (optionally calibrated against auditor labels), per
//! label type if a partitioner is supplied, and optionally compressed into a
//! logistic item-response model. At collection time each item's labels are
//! aggregated and the estimated accuracy decides whether to request another
//! label.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregate;
pub mod bitmap;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod irt;
pub mod label;
pub mod model;
pub mod multipoint;
pub mod oak;
pub mod partition;
pub mod poak;
pub mod similarity;
pub mod synth;
pub mod train;

#[cfg(test)]
mod fixtures;

pub use aggregate::{AggregationMode, Aggregator};
pub use dataset::{Dataset, DatasetBuilder};
pub use error::{Error, Result};
pub use estimate::{Estimator, PredictedItem};
pub use label::{Label, LabelKind};
pub use model::{EstimatorKind, Model};
pub use partition::Partitioner;
pub use similarity::SimilarityFn;
pub use train::{train, TrainConfig};
