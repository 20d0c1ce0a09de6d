//! Local classifier chains.
//!
//! A global classifier makes the first decision; a set of binary local models,
//! trained on label pairs that the global model finds similar or confuses on a
//! validation set, then refine that decision one pair at a time.
//!
//! The pieces, in pipeline order:
//!
//! * [`models`]: the [`ScoringModel`](models::ScoringModel) interface and two
//!   built-in trainers (nearest centroid, multinomial logistic regression).
//! * [`matrices`]: class-mean similarity and confusion matrices over validation scores.
//! * [`pairs`]: threshold-based pair selection and the local model bank.
//! * [`signature`]: per-sample global + local score records and their JSON form.
//! * [`matcher`]: the chain walk and cosine-similarity gallery matching.
//! * [`stats`]: average ranks, Friedman / Iman-Davenport statistics and the
//!   Bonferroni-Dunn critical difference.

pub mod domain;
pub mod error;
pub mod matcher;
pub mod matrices;
pub mod models;
pub mod pairs;
pub mod signature;
pub mod stats;

pub use domain::{
    canonical_pair, validate_dataset, ChainStep, ChainTrace, Label, LabelPair, LabelPairSet, LabeledDataset,
    MatchMode, PairSource, Signature, Termination,
};
pub use error::{LccError, Result};
