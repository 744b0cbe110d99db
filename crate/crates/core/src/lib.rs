//! Name-to-gender inference toolkit.
//!
//! The crate turns labeled name corpora into per-name female/male frequency
//! tables, classifies names with a thresholded maximum-likelihood model,
//! combines inferrers into two-stage and majority-vote hybrids, and scores any
//! inferrer against held-out test sets (accuracy, precision, recall, F1 and
//! gender bias error) with size-weighted aggregation across datasets.
//!
//! Module map:
//!
//! - [`corpus`]: cleaning rules, CSV and SSA ingestion, table merging, dataset statistics
//! - [`mle`]: maximum-likelihood estimates and thresholded classification
//! - [`inferrer`]: the uniform inference interface, a mock, and HTTP service adapters
//! - [`ensemble`]: two-stage and majority-vote hybrids
//! - [`eval`]: seeded splits, confusion counts, metrics, weighted aggregation, reports
//! - [`analysis`]: error analysis by name length, character set and character n-grams
//! - [`cli`]: the `namegender` command line

pub mod analysis;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod inferrer;
pub mod manifest;
pub mod mle;

pub use corpus::{
    dataset_stats, merge_tables, normalize_name, split_full_name, DatasetStats, FrequencyTable,
    Gender, GenderCounts, NameType, RejectReason,
};
pub use eval::{aggregate, metrics, score, ConfusionCounts, LabeledTestSet, Metrics, MetricsReport};
pub use inferrer::{Inferrer, InferrerHandle, InferrerKind, MockInferrer};
pub use mle::{mle_female, GenderLabel, MleModel, Prediction, Tau};
