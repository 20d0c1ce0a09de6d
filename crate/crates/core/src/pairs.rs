//! Label-pair selection from the score matrices and training of the local
//! binary models for the selected pairs.

use std::collections::BTreeMap;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{canonical_pair, LabelPair, LabelPairSet, LabeledDataset, PairSource};
use crate::error::{LccError, Result};
use crate::matrices::{ConfusionMatrices, SimilarityMatrices};
use crate::models::{train_local_model, train_local_model_warm, LogisticModel, Model, ModelConfig, ScoringModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSelectionConfig {
    pub source: PairSource,
    pub threshold: f64,
}

impl PairSelectionConfig {
    pub fn new(source: PairSource, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self { source, threshold })
    }

    pub fn select(&self, similarity: &SimilarityMatrices, confusion: &ConfusionMatrices) -> Result<LabelPairSet> {
        match self.source {
            PairSource::Similarity => select_pairs_similarity(similarity.q.view(), self.threshold),
            PairSource::Confusion => select_pairs_confusion(confusion.r.view(), self.threshold),
        }
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(LccError::InvalidThreshold(t));
    }
    Ok(())
}

fn check_square(m: ArrayView2<'_, f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(LccError::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    Ok(())
}

/// Every off-diagonal `{i, j}` with `q[i][j] > t_s`.
pub fn select_pairs_similarity(q: ArrayView2<'_, f64>, t_s: f64) -> Result<LabelPairSet> {
    check_threshold(t_s)?;
    check_square(q)?;
    Ok(LabelPairSet::new(
        PairSource::Similarity,
        t_s,
        off_diagonal_above(q, t_s),
    ))
}

/// Every `{i, j}` with `r[i][j] > t_c` or `r[j][i] > t_c`; direction is ignored.
pub fn select_pairs_confusion(r: ArrayView2<'_, f64>, t_c: f64) -> Result<LabelPairSet> {
    check_threshold(t_c)?;
    check_square(r)?;
    Ok(LabelPairSet::new(PairSource::Confusion, t_c, off_diagonal_above(r, t_c)))
}

fn off_diagonal_above(m: ArrayView2<'_, f64>, t: f64) -> Vec<LabelPair> {
    m.indexed_iter()
        .filter(|&((i, j), &v)| i != j && v > t)
        .map(|((i, j), _)| canonical_pair(i, j).expect("off-diagonal"))
        .collect()
}

/// The selected pairs together with one trained binary model per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "BankDoc", try_from = "BankDoc")]
pub struct LocalModelBank {
    pair_set: LabelPairSet,
    models: BTreeMap<LabelPair, Model>,
}

impl LocalModelBank {
    /// Rejects banks whose model keys differ from the pair set or whose
    /// models are not binary.
    pub fn new(pair_set: LabelPairSet, models: BTreeMap<LabelPair, Model>) -> Result<Self> {
        if !models.keys().eq(pair_set.pairs.iter()) {
            return Err(LccError::InvariantViolation(
                "local model keys must equal the pair set".into(),
            ));
        }
        if let Some((pair, _)) = models.iter().find(|(_, m)| m.class_count() != 2) {
            return Err(LccError::InvariantViolation(format!("local model for {pair} is not binary")));
        }
        let mut dims = models.values().map(|m| m.dimension());
        if let Some(first) = dims.next() {
            if let Some(found) = dims.find(|&d| d != first) {
                return Err(LccError::DimensionMismatch { expected: first, found });
            }
        }
        Ok(Self { pair_set, models })
    }

    pub fn empty(source: PairSource, threshold: f64) -> Self {
        Self {
            pair_set: LabelPairSet::empty(source, threshold),
            models: BTreeMap::new(),
        }
    }

    pub fn pair_set(&self) -> &LabelPairSet {
        &self.pair_set
    }

    pub fn models(&self) -> &BTreeMap<LabelPair, Model> {
        &self.models
    }

    pub fn get(&self, pair: LabelPair) -> Option<&Model> {
        self.models.get(&pair)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Feature dimension shared by every model, `None` for an empty bank.
    pub fn dimension(&self) -> Option<usize> {
        self.models.values().next().map(|m| m.dimension())
    }
}

/// Trains one local model per pair. Pairs train independently and in
/// parallel; the result does not depend on scheduling.
pub fn build_local_bank(
    train: &LabeledDataset,
    pair_set: &LabelPairSet,
    config: &ModelConfig,
) -> Result<LocalModelBank> {
    collect_bank(pair_set, |pair| train_local_model(train, pair, config))
}

/// Logistic local models warm-started from the matching rows of `global`.
pub fn build_local_bank_warm(
    train: &LabeledDataset,
    pair_set: &LabelPairSet,
    config: &crate::models::LogisticConfig,
    global: &LogisticModel,
) -> Result<LocalModelBank> {
    collect_bank(pair_set, |pair| train_local_model_warm(train, pair, config, global))
}

fn collect_bank<F>(pair_set: &LabelPairSet, train_one: F) -> Result<LocalModelBank>
where
    F: Fn(LabelPair) -> Result<Model> + Sync,
{
    let pairs: Vec<LabelPair> = pair_set.iter().collect();
    let trained: Vec<(LabelPair, Model)> = pairs
        .into_par_iter()
        .map(|pair| {
            train_one(pair)
                .map(|m| (pair, m))
                .map_err(|e| LccError::LocalModel {
                    pair,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    LocalModelBank::new(pair_set.clone(), trained.into_iter().collect())
}

#[derive(Serialize, Deserialize)]
struct BankDoc {
    pair_set: LabelPairSet,
    models: Vec<BankEntry>,
}

#[derive(Serialize, Deserialize)]
struct BankEntry {
    pair: LabelPair,
    model: Model,
}

impl From<LocalModelBank> for BankDoc {
    fn from(bank: LocalModelBank) -> Self {
        Self {
            pair_set: bank.pair_set,
            models: bank
                .models
                .into_iter()
                .map(|(pair, model)| BankEntry { pair, model })
                .collect(),
        }
    }
}

impl TryFrom<BankDoc> for LocalModelBank {
    type Error = LccError;

    fn try_from(doc: BankDoc) -> Result<Self> {
        let n = doc.models.len();
        let models: BTreeMap<_, _> = doc.models.into_iter().map(|e| (e.pair, e.model)).collect();
        if models.len() != n {
            return Err(LccError::MalformedDocument("duplicate pair in bank".into()));
        }
        LocalModelBank::new(doc.pair_set, models)
    }
}
