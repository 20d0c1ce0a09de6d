//! Stratified train / validation / test splits.

use lcc_core::LabeledDataset;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.5,
            validation: 0.25,
            test: 0.25,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!(
                "split fractions must lie in [0,1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: LabeledDataset,
    pub validation: LabeledDataset,
    pub test: LabeledDataset,
}

/// Shuffles each class independently and cuts it by `fractions`; the test
/// split receives the rounding remainder.
pub fn stratified_split(ds: &LabeledDataset, fractions: &SplitFractions, seed: u64) -> Result<Splits> {
    fractions.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for c in 0..ds.class_count() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels()[i] == c).collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let n_train = (n * fractions.train).round() as usize;
        let n_val = ((n * fractions.validation).round() as usize).min(idx.len() - n_train);
        parts[0].extend_from_slice(&idx[..n_train]);
        parts[1].extend_from_slice(&idx[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&idx[n_train + n_val..]);
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    Ok(Splits {
        train: ds.select(&parts[0])?,
        validation: ds.select(&parts[1])?,
        test: ds.select(&parts[2])?,
    })
}
