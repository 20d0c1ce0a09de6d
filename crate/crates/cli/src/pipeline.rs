//! End-to-end experiment: train, score the validation split, select pairs,
//! train local models, sign and match the test split.

use std::collections::{BTreeMap, BTreeSet};

use lcc_core::matcher::match_signature;
use lcc_core::matrices::{confusion_matrix, mean_vectors, similarity_matrix, ConfusionMatrices, SimilarityMatrices};
use lcc_core::models::{
    argmax, score_batch, ScoringModel, train_local_model, train_local_model_warm, train_model, Model, ModelConfig,
};
use lcc_core::pairs::{select_pairs_confusion, select_pairs_similarity, LocalModelBank};
use lcc_core::signature::build_signature;
use lcc_core::{ChainTrace, Label, LabelPair, LabelPairSet, LabeledDataset, PairSource, Termination};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Result, StageExt};
use crate::ingest::{ingest_csv, ingest_csv_with_labels};
use crate::split::{stratified_split, Splits};
use crate::synthetic::generate_synthetic;

pub fn load_splits(config: &ExperimentConfig) -> Result<Splits> {
    let data = &config.data;
    if let (Some(train), Some(validation), Some(test)) = (&data.train, &data.validation, &data.test) {
        let train = ingest_csv(train)?;
        let names = train.label_names().to_vec();
        return Ok(Splits {
            validation: ingest_csv_with_labels(validation, &names)?,
            test: ingest_csv_with_labels(test, &names)?,
            train,
        });
    }
    let ds = match &data.dataset {
        Some(path) => ingest_csv(path)?,
        None => generate_synthetic(&config.synthetic_spec())?,
    };
    stratified_split(&ds, &data.split, config.seed)
}

/// Validation-split matrices of a trained global model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationMatrices {
    pub similarity: SimilarityMatrices,
    pub confusion: ConfusionMatrices,
}

pub fn validation_matrices(global: &Model, validation: &LabeledDataset) -> Result<ValidationMatrices> {
    let scores = score_batch(global, validation.features()).stage("score validation")?;
    let predicted: Vec<Label> = scores.rows().into_iter().map(|r| argmax(r.as_slice().expect("row-major"))).collect();
    let means = mean_vectors(scores.view(), validation.labels()).stage("mean vectors")?;
    Ok(ValidationMatrices {
        similarity: similarity_matrix(means.view()).stage("similarity matrix")?,
        confusion: confusion_matrix(validation.labels(), &predicted, global.class_count())
            .stage("confusion matrix")?,
    })
}

pub fn select(matrices: &ValidationMatrices, source: PairSource, threshold: f64) -> Result<LabelPairSet> {
    match source {
        PairSource::Similarity => select_pairs_similarity(matrices.similarity.q.view(), threshold),
        PairSource::Confusion => select_pairs_confusion(matrices.confusion.r.view(), threshold),
    }
    .stage("pair selection")
}

/// How local models are trained for a run.
#[derive(Debug, Clone, Copy)]
pub struct LocalTraining<'a> {
    pub config: ModelConfig,
    pub warm_from: Option<&'a Model>,
}

impl LocalTraining<'_> {
    fn train(&self, train: &LabeledDataset, pair: LabelPair) -> lcc_core::Result<Model> {
        match (self.config, self.warm_from) {
            (ModelConfig::Logistic(c), Some(Model::Logistic(g))) => train_local_model_warm(train, pair, &c, g),
            _ => train_local_model(train, pair, &self.config),
        }
    }
}

/// Trains every pair in `pairs` once, in parallel.
pub fn train_pair_models(
    train: &LabeledDataset,
    pairs: &BTreeSet<LabelPair>,
    how: LocalTraining<'_>,
) -> Result<BTreeMap<LabelPair, Model>> {
    pairs
        .par_iter()
        .map(|&pair| {
            how.train(train, pair)
                .map(|m| (pair, m))
                .map_err(|e| lcc_core::LccError::LocalModel {
                    pair,
                    source: Box::new(e),
                })
        })
        .collect::<lcc_core::Result<_>>()
        .stage("local models")
}

pub fn bank_from_cache(pair_set: &LabelPairSet, cache: &BTreeMap<LabelPair, Model>) -> Result<LocalModelBank> {
    let models = pair_set.iter().map(|p| (p, cache[&p].clone())).collect();
    LocalModelBank::new(pair_set.clone(), models).stage("local bank")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub predictions: Vec<Label>,
    pub traces: Vec<ChainTrace>,
}

/// Signs and matches every sample of `ds` in parallel.
pub fn evaluate(global: &Model, bank: &LocalModelBank, ds: &LabeledDataset) -> Result<Evaluation> {
    let traces: Vec<ChainTrace> = (0..ds.len())
        .into_par_iter()
        .map(|i| {
            let s = build_signature(ds.sample(i), global, bank)?;
            match_signature(&s, bank.pair_set()).map(|(_, t)| t)
        })
        .collect::<lcc_core::Result<_>>()
        .stage("signatures and matching")?;
    let predictions: Vec<Label> = traces.iter().map(|t| t.final_label).collect();
    Ok(Evaluation {
        accuracy: accuracy(&predictions, ds.labels()),
        predictions,
        traces,
    })
}

pub fn accuracy(predicted: &[Label], truth: &[Label]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}

/// Count of chains by number of accepted steps, index = steps.
pub fn chain_length_histogram(traces: &[ChainTrace]) -> Vec<usize> {
    let longest = traces.iter().map(|t| t.steps.len()).max().unwrap_or(0);
    let mut hist = vec![0; longest + 1];
    for t in traces {
        hist[t.steps.len()] += 1;
    }
    hist
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TerminationCounts {
    pub no_pairs: usize,
    pub no_improvement: usize,
    pub cycle_guard: usize,
}

impl TerminationCounts {
    pub fn tally(traces: &[ChainTrace]) -> Self {
        let mut c = Self::default();
        for t in traces {
            match t.terminated_by {
                Termination::NoPairs => c.no_pairs += 1,
                Termination::NoImprovement => c.no_improvement += 1,
                Termination::CycleGuard => c.cycle_guard += 1,
            }
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub source: PairSource,
    pub threshold: f64,
    pub pair_count: usize,
    pub pairs: Vec<LabelPair>,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    /// Test traces whose final label differs from the global decision.
    pub changed: usize,
    pub chain_lengths: Vec<usize>,
    pub terminations: TerminationCounts,
}

/// The threshold chosen per source on validation accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedResult {
    pub source: PairSource,
    pub threshold: f64,
    pub pair_count: usize,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label_names: Vec<String>,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub global_validation_accuracy: f64,
    pub global_test_accuracy: f64,
    pub sweep: Vec<ThresholdResult>,
    pub selected: Vec<SelectedResult>,
}

impl ExperimentReport {
    pub fn selected(&self, source: PairSource) -> Option<&SelectedResult> {
        self.selected.iter().find(|s| s.source == source)
    }

    pub fn sweep_for(&self, source: PairSource) -> impl Iterator<Item = &ThresholdResult> {
        self.sweep.iter().filter(move |r| r.source == source)
    }
}

pub fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let splits = load_splits(config)?;
    run_on_splits(config, &splits)
}

pub fn run_on_splits(config: &ExperimentConfig, splits: &Splits) -> Result<ExperimentReport> {
    config.validate()?;
    let global = train_model(&splits.train, &config.global_model()).stage("global model")?;
    let matrices = validation_matrices(&global, &splits.validation)?;

    let mut pair_sets = Vec::new();
    let sources = [
        (PairSource::Similarity, &config.selection.similarity_thresholds),
        (PairSource::Confusion, &config.selection.confusion_thresholds),
    ];
    for (source, thresholds) in sources {
        for &t in thresholds {
            pair_sets.push(select(&matrices, source, t)?);
        }
    }
    let all_pairs: BTreeSet<LabelPair> = pair_sets.iter().flat_map(|s| s.iter()).collect();
    let how = LocalTraining {
        config: config.local_model(),
        warm_from: config.warm_start.then_some(&global),
    };
    let cache = train_pair_models(&splits.train, &all_pairs, how)?;

    let empty = LocalModelBank::empty(PairSource::Confusion, 1.0);
    let global_val = evaluate(&global, &empty, &splits.validation)?;
    let global_test = evaluate(&global, &empty, &splits.test)?;

    let mut sweep = Vec::new();
    for pair_set in &pair_sets {
        let bank = bank_from_cache(pair_set, &cache)?;
        let val = evaluate(&global, &bank, &splits.validation)?;
        let test = evaluate(&global, &bank, &splits.test)?;
        sweep.push(ThresholdResult {
            source: pair_set.source,
            threshold: pair_set.threshold,
            pair_count: pair_set.len(),
            pairs: pair_set.iter().collect(),
            validation_accuracy: val.accuracy,
            test_accuracy: test.accuracy,
            changed: test
                .predictions
                .iter()
                .zip(&global_test.predictions)
                .filter(|(a, b)| a != b)
                .count(),
            chain_lengths: chain_length_histogram(&test.traces),
            terminations: TerminationCounts::tally(&test.traces),
        });
    }

    let selected = [PairSource::Similarity, PairSource::Confusion]
        .into_iter()
        .filter_map(|source| select_best(&sweep, source))
        .collect();

    Ok(ExperimentReport {
        label_names: splits.train.label_names().to_vec(),
        train_size: splits.train.len(),
        validation_size: splits.validation.len(),
        test_size: splits.test.len(),
        global_validation_accuracy: global_val.accuracy,
        global_test_accuracy: global_test.accuracy,
        sweep,
        selected,
    })
}

/// Highest validation accuracy; ties go to the smaller pair set, then to the
/// earlier threshold.
fn select_best(sweep: &[ThresholdResult], source: PairSource) -> Option<SelectedResult> {
    let mut best: Option<&ThresholdResult> = None;
    for r in sweep.iter().filter(|r| r.source == source) {
        let better = match best {
            None => true,
            Some(b) => {
                r.validation_accuracy > b.validation_accuracy
                    || (r.validation_accuracy == b.validation_accuracy && r.pair_count < b.pair_count)
            }
        };
        if better {
            best = Some(r);
        }
    }
    best.map(|r| SelectedResult {
        source,
        threshold: r.threshold,
        pair_count: r.pair_count,
        validation_accuracy: r.validation_accuracy,
        test_accuracy: r.test_accuracy,
    })
}
