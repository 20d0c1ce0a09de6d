//! Domain types shared by the rest of the crate.
//!
//! Labels are dense indices `0..class_count` with a parallel table of display
//! names. Everything here is immutable once built.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{LccError, Result};

/// Index of a class label.
pub type Label = usize;

/// Samples with integer labels over a fixed label table.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<Label>,
    label_names: Vec<String>,
}

/// Checks the raw ingredients of a [`LabeledDataset`].
pub fn validate_dataset(samples: &[Vec<f64>], labels: &[Label], class_count: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(LccError::EmptyDataset);
    }
    if samples.len() != labels.len() {
        return Err(LccError::LengthMismatch {
            expected: samples.len(),
            found: labels.len(),
        });
    }
    let dim = samples[0].len();
    if let Some((row, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != dim) {
        return Err(LccError::RaggedFeatures {
            row,
            expected: dim,
            found: s.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= class_count) {
        return Err(LccError::LabelOutOfRange { label, class_count });
    }
    Ok(())
}

impl LabeledDataset {
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<Label>, label_names: Vec<String>) -> Result<Self> {
        validate_dataset(&samples, &labels, label_names.len())?;
        let dim = samples[0].len();
        let flat: Vec<f64> = samples.into_iter().flatten().collect();
        let features = Array2::from_shape_vec((labels.len(), dim), flat)
            .expect("row lengths were validated");
        Ok(Self {
            features,
            labels,
            label_names,
        })
    }

    /// Builds a dataset whose label names are the decimal indices `0..class_count`.
    pub fn with_class_count(samples: Vec<Vec<f64>>, labels: Vec<Label>, class_count: usize) -> Result<Self> {
        let names = (0..class_count).map(|c| c.to_string()).collect();
        Self::new(samples, labels, names)
    }

    pub fn from_array(features: Array2<f64>, labels: Vec<Label>, label_names: Vec<String>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(LccError::EmptyDataset);
        }
        if features.nrows() != labels.len() {
            return Err(LccError::LengthMismatch {
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        let class_count = label_names.len();
        if let Some(&label) = labels.iter().find(|&&y| y >= class_count) {
            return Err(LccError::LabelOutOfRange { label, class_count });
        }
        Ok(Self {
            features,
            labels,
            label_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.features.ncols()
    }

    pub fn class_count(&self) -> usize {
        self.label_names.len()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Number of samples per class, indexed by label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// First class with no samples, if any.
    pub fn missing_class(&self) -> Option<Label> {
        self.class_counts().iter().position(|&c| c == 0)
    }

    /// Keeps the rows listed in `indices`, in that order. The label table is unchanged.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select(ndarray::Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_array(features, labels, self.label_names.clone())
    }
}

/// An unordered pair of distinct labels, stored as `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[Label; 2]", into = "[Label; 2]")]
pub struct LabelPair {
    lo: Label,
    hi: Label,
}

/// Canonical unordered pair `{i, j}`.
pub fn canonical_pair(i: Label, j: Label) -> Result<LabelPair> {
    if i == j {
        return Err(LccError::SelfPair(i));
    }
    Ok(LabelPair {
        lo: i.min(j),
        hi: i.max(j),
    })
}

impl LabelPair {
    /// Accepts only the canonical orientation `lo < hi`.
    pub fn new(lo: Label, hi: Label) -> Result<Self> {
        if lo == hi {
            return Err(LccError::SelfPair(lo));
        }
        if lo > hi {
            return Err(LccError::InvariantViolation(format!(
                "label pair ({lo}, {hi}) is not in canonical order"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(self) -> Label {
        self.lo
    }

    pub fn hi(self) -> Label {
        self.hi
    }

    pub fn contains(self, label: Label) -> bool {
        self.lo == label || self.hi == label
    }

    /// The member that is not `label`, when `label` belongs to the pair.
    pub fn other(self, label: Label) -> Option<Label> {
        if label == self.lo {
            Some(self.hi)
        } else if label == self.hi {
            Some(self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for LabelPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

impl TryFrom<[Label; 2]> for LabelPair {
    type Error = LccError;

    fn try_from([lo, hi]: [Label; 2]) -> Result<Self> {
        LabelPair::new(lo, hi)
    }
}

impl From<LabelPair> for [Label; 2] {
    fn from(p: LabelPair) -> Self {
        [p.lo, p.hi]
    }
}

/// Which score matrix a pair set was selected from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSource {
    Similarity,
    Confusion,
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairSource::Similarity => "similarity",
            PairSource::Confusion => "confusion",
        })
    }
}

/// Label pairs selected by thresholding a score matrix. Iterates in `(lo, hi)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPairSet {
    pub source: PairSource,
    pub threshold: f64,
    pub pairs: BTreeSet<LabelPair>,
}

impl LabelPairSet {
    pub fn new(source: PairSource, threshold: f64, pairs: impl IntoIterator<Item = LabelPair>) -> Self {
        Self {
            source,
            threshold,
            pairs: pairs.into_iter().collect(),
        }
    }

    pub fn empty(source: PairSource, threshold: f64) -> Self {
        Self::new(source, threshold, [])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = LabelPair> + '_ {
        self.pairs.iter().copied()
    }

    pub fn contains(&self, pair: LabelPair) -> bool {
        self.pairs.contains(&pair)
    }

    /// Pairs containing `label`, in sorted order.
    pub fn pairs_with(&self, label: Label) -> impl Iterator<Item = LabelPair> + '_ {
        self.iter().filter(move |p| p.contains(label))
    }

    /// Largest label index referenced, if any.
    pub fn max_label(&self) -> Option<Label> {
        self.pairs.iter().map(|p| p.hi).max()
    }
}

/// How the global component of a signature was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Class probabilities from a global classifier.
    Classification,
    /// Per-identity cosine similarities against a gallery.
    Identification,
}

/// Local matching vector `(b_lo, b_hi)` for one pair.
pub type LocalScores = (f64, f64);

/// Tolerance used when checking that probability vectors sum to one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Two-part per-sample record: the global matching vector and one local
/// matching vector per selected pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    global: Vec<f64>,
    local: BTreeMap<LabelPair, LocalScores>,
    mode: MatchMode,
}

impl Signature {
    pub fn new(global: Vec<f64>, local: BTreeMap<LabelPair, LocalScores>, mode: MatchMode) -> Result<Self> {
        let s = Self { global, local, mode };
        s.check(PROBABILITY_TOLERANCE)?;
        Ok(s)
    }

    /// Verifies the probability invariants with the given sum tolerance.
    pub fn check(&self, tolerance: f64) -> Result<()> {
        let l = self.global.len();
        if l == 0 {
            return Err(LccError::InvariantViolation("global component is empty".into()));
        }
        if self.global.iter().any(|v| !v.is_finite()) {
            return Err(LccError::InvariantViolation("global component has non-finite entries".into()));
        }
        if self.mode == MatchMode::Classification {
            if self.global.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(LccError::InvariantViolation(
                    "global probabilities must lie in [0, 1]".into(),
                ));
            }
            let sum: f64 = self.global.iter().sum();
            if (sum - 1.0).abs() > tolerance {
                return Err(LccError::InvariantViolation(format!(
                    "global probabilities sum to {sum}"
                )));
            }
        }
        for (pair, &(a, b)) in &self.local {
            if pair.hi >= l {
                return Err(LccError::LabelOutOfRange {
                    label: pair.hi,
                    class_count: l,
                });
            }
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(LccError::InvariantViolation(format!(
                    "local scores for {pair} must lie in [0, 1], got ({a}, {b})"
                )));
            }
            if (a + b - 1.0).abs() > tolerance {
                return Err(LccError::InvariantViolation(format!(
                    "local scores for {pair} sum to {}",
                    a + b
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(
        global: Vec<f64>,
        local: BTreeMap<LabelPair, LocalScores>,
        mode: MatchMode,
    ) -> Self {
        Self { global, local, mode }
    }

    pub fn global(&self) -> &[f64] {
        &self.global
    }

    pub fn local(&self) -> &BTreeMap<LabelPair, LocalScores> {
        &self.local
    }

    pub fn local_scores(&self, pair: LabelPair) -> Option<LocalScores> {
        self.local.get(&pair).copied()
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    pub fn class_count(&self) -> usize {
        self.global.len()
    }

    /// Number of reals stored in the local component (two per pair).
    pub fn local_value_count(&self) -> usize {
        2 * self.local.len()
    }
}

/// Why a chain walk stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No selected pair contains the current label.
    NoPairs,
    /// No local model overturned the current label.
    NoImprovement,
    /// The next label had already been accepted earlier in the walk.
    CycleGuard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub pair: LabelPair,
    pub accepted_label: Label,
    pub local_value: f64,
}

/// Record of a single chain walk from the global decision to the final label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub start_label: Label,
    pub steps: Vec<ChainStep>,
    pub final_label: Label,
    pub terminated_by: Termination,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_dataset_is_valid() {
        let ds = LabeledDataset::with_class_count(
            vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]],
            vec![0, 1, 0],
            2,
        )
        .unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dimension(), 2);
        assert_eq!(ds.class_counts(), vec![2, 1]);
    }

    #[test]
    fn empty_dataset_rejected() {
        assert_eq!(validate_dataset(&[], &[], 2), Err(LccError::EmptyDataset));
    }

    #[test]
    fn label_out_of_range_rejected() {
        let err = validate_dataset(&[vec![1.0], vec![2.0]], &[0, 5], 3).unwrap_err();
        assert_eq!(
            err,
            LccError::LabelOutOfRange {
                label: 5,
                class_count: 3
            }
        );
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = validate_dataset(&[vec![1.0, 2.0], vec![2.0]], &[0, 0], 1).unwrap_err();
        assert!(matches!(err, LccError::RaggedFeatures { row: 1, .. }));
    }

    #[test]
    fn canonical_pair_orders_members() {
        assert_eq!(canonical_pair(4, 1).unwrap(), LabelPair::new(1, 4).unwrap());
        assert_eq!(canonical_pair(1, 4).unwrap(), LabelPair::new(1, 4).unwrap());
        assert_eq!(canonical_pair(2, 2), Err(LccError::SelfPair(2)));
    }

    #[test]
    fn non_canonical_pair_rejected() {
        assert!(LabelPair::new(1, 0).is_err());
        assert!(serde_json::from_str::<LabelPair>("[3, 1]").is_err());
        let p: LabelPair = serde_json::from_str("[1, 3]").unwrap();
        assert_eq!(p.other(1), Some(3));
        assert_eq!(p.other(2), None);
    }

    #[test]
    fn signature_rejects_unnormalized_local_scores() {
        let mut local = BTreeMap::new();
        local.insert(LabelPair::new(0, 1).unwrap(), (0.3, 0.8));
        let err = Signature::new(vec![0.5, 0.5], local, MatchMode::Classification).unwrap_err();
        assert!(matches!(err, LccError::InvariantViolation(_)));
    }

    #[test]
    fn identification_signature_allows_negative_similarities() {
        let s = Signature::new(vec![-0.2, 0.9], BTreeMap::new(), MatchMode::Identification).unwrap();
        assert_eq!(s.class_count(), 2);
    }
}
