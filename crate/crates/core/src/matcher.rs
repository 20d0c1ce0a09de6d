//! Hierarchical matching: start from the global decision, then walk the chain
//! of local binary models until none of them overturns the current label.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView1};

use crate::domain::{ChainStep, ChainTrace, Label, LabelPairSet, LabeledDataset, Signature, Termination};
use crate::error::{LccError, Result};
use crate::models::argmax;
use crate::pairs::LocalModelBank;
use crate::signature::build_identification_signature;

/// Enrolled identities for identification mode: one or more feature vectors
/// per identity, every identity in `0..class_count` represented.
#[derive(Debug, Clone, PartialEq)]
pub struct Gallery {
    features: Array2<f64>,
    labels: Vec<Label>,
    norms: Vec<f64>,
    class_count: usize,
}

fn norm(x: ArrayView1<'_, f64>) -> f64 {
    x.dot(&x).sqrt()
}

impl Gallery {
    pub fn new(entries: Vec<(Label, Vec<f64>)>, class_count: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(LccError::EmptyGallery);
        }
        let (labels, samples): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let ds = LabeledDataset::with_class_count(samples, labels, class_count)?;
        Self::from_dataset(&ds)
    }

    pub fn from_dataset(ds: &LabeledDataset) -> Result<Self> {
        if let Some(c) = ds.missing_class() {
            return Err(LccError::MissingClass(c));
        }
        let norms: Vec<f64> = ds.features().rows().into_iter().map(norm).collect();
        if norms.contains(&0.0) {
            return Err(LccError::ZeroVector);
        }
        Ok(Self {
            features: ds.features().to_owned(),
            labels: ds.labels().to_vec(),
            norms,
            class_count: ds.class_count(),
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
        self.class_count
    }
}

/// Argmax of the global component, ties to the lowest label.
pub fn global_match_classification(s: &Signature) -> Label {
    argmax(s.global())
}

/// Per-identity matching vector (best cosine similarity over that identity's
/// entries) and its argmax.
pub fn global_match_identification(probe: ArrayView1<'_, f64>, gallery: &Gallery) -> Result<(Label, Vec<f64>)> {
    if probe.len() != gallery.dimension() {
        return Err(LccError::DimensionMismatch {
            expected: gallery.dimension(),
            found: probe.len(),
        });
    }
    let probe_norm = norm(probe);
    if probe_norm == 0.0 {
        return Err(LccError::ZeroVector);
    }
    let mut matching = vec![f64::NEG_INFINITY; gallery.class_count];
    for ((entry, &label), &entry_norm) in gallery.features.rows().into_iter().zip(&gallery.labels).zip(&gallery.norms) {
        let cos = entry.dot(&probe) / (entry_norm * probe_norm);
        if cos > matching[label] {
            matching[label] = cos;
        }
    }
    Ok((argmax(&matching), matching))
}

/// Walks the local-model chain starting at `start`.
///
/// Each round collects the pairs containing the current label `o`, and among
/// those whose local winner differs from `o` picks the one with the largest
/// winning score (first in pair order on ties; the running best starts at 0
/// every round). The walk stops when no pair contains `o`, when no local model
/// overturns it, or when the proposed label was already accepted earlier, in
/// which case the current label is kept.
pub fn match_chain(s: &Signature, pair_set: &LabelPairSet, start: Label) -> Result<ChainTrace> {
    let l = s.class_count();
    if start >= l {
        return Err(LccError::LabelOutOfRange {
            label: start,
            class_count: l,
        });
    }
    let mut current = start;
    let mut visited = BTreeSet::from([start]);
    let mut steps = Vec::new();
    let terminated_by = loop {
        let mut candidates = pair_set.pairs_with(current).peekable();
        if candidates.peek().is_none() {
            break Termination::NoPairs;
        }
        let mut best_value = 0.0;
        let mut best: Option<ChainStep> = None;
        for pair in candidates {
            let (b_lo, b_hi) = s.local_scores(pair).ok_or(LccError::MissingLocalVector(pair))?;
            let (winner, value) = if b_lo >= b_hi { (pair.lo(), b_lo) } else { (pair.hi(), b_hi) };
            if winner != current && value > best_value {
                best_value = value;
                best = Some(ChainStep {
                    pair,
                    accepted_label: winner,
                    local_value: value,
                });
            }
        }
        match best {
            None => break Termination::NoImprovement,
            Some(step) if visited.contains(&step.accepted_label) => break Termination::CycleGuard,
            Some(step) => {
                current = step.accepted_label;
                visited.insert(current);
                steps.push(step);
            }
        }
    };
    Ok(ChainTrace {
        start_label: start,
        steps,
        final_label: current,
        terminated_by,
    })
}

/// Global decision from the signature's global component followed by the
/// chain walk. For identification-mode signatures the global component is
/// already the gallery matching vector.
pub fn match_signature(s: &Signature, pair_set: &LabelPairSet) -> Result<(Label, ChainTrace)> {
    let trace = match_chain(s, pair_set, global_match_classification(s))?;
    Ok((trace.final_label, trace))
}

/// Identification mode end to end: cosine matching against the gallery, then
/// the chain over `bank`'s local models.
pub fn match_probe(
    probe: ArrayView1<'_, f64>,
    gallery: &Gallery,
    bank: &LocalModelBank,
) -> Result<(Label, ChainTrace)> {
    let s = build_identification_signature(probe, gallery, bank)?;
    match_signature(&s, bank.pair_set())
}
