//! Seeded Gaussian clusters with groups of deliberately close classes.

use lcc_core::{Label, LabeledDataset};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub dimension: usize,
    pub per_class: usize,
    pub sigma: f64,
    /// Distance between the centers of two classes in the same group.
    pub delta_near: f64,
    /// Distance between centers of classes in different groups.
    pub delta_far: f64,
    #[serde(default)]
    pub confusable_groups: Vec<Vec<Label>>,
    /// Per-axis multipliers on `sigma`; empty means isotropic.
    #[serde(default)]
    pub axis_spread: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            class_count: 4,
            dimension: 8,
            per_class: 200,
            sigma: 1.0,
            delta_near: 1.5,
            delta_far: 10.0,
            confusable_groups: vec![vec![0, 1]],
            axis_spread: Vec::new(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Every class in exactly one group, listed groups first then singletons.
    fn groups(&self) -> Vec<Vec<Label>> {
        let mut groups = self.confusable_groups.clone();
        for c in 0..self.class_count {
            if !groups.iter().any(|g| g.contains(&c)) {
                groups.push(vec![c]);
            }
        }
        groups
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.class_count == 0 || self.dimension == 0 {
            return bad("class_count and dimension must be positive".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be finite and non-negative, got {}", self.sigma));
        }
        if !(self.delta_near >= 0.0 && self.delta_near < self.delta_far && self.delta_far.is_finite()) {
            return bad("need 0 <= delta_near < delta_far".into());
        }
        let mut seen = vec![false; self.class_count];
        for &c in self.confusable_groups.iter().flatten() {
            if c >= self.class_count {
                return bad(format!("group member {c} is not a class"));
            }
            if std::mem::replace(&mut seen[c], true) {
                return bad(format!("class {c} appears in more than one group"));
            }
        }
        if !self.axis_spread.is_empty() && self.axis_spread.len() != self.dimension {
            return bad(format!("axis_spread needs {} entries", self.dimension));
        }
        if self.axis_spread.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("axis_spread entries must be finite and non-negative".into());
        }
        let groups = self.groups();
        let widest = groups.iter().map(Vec::len).max().unwrap_or(0);
        if self.dimension < groups.len() + widest {
            return bad(format!(
                "dimension {} too small for {} groups of up to {} classes",
                self.dimension,
                groups.len(),
                widest
            ));
        }
        Ok(())
    }

    /// Group `g` is anchored at `(delta_far/sqrt 2) e_g`; its `j`-th member is
    /// offset by `(delta_near/sqrt 2) e_{G+j}`.
    pub fn centers(&self) -> Array2<f64> {
        let groups = self.groups();
        let g_count = groups.len();
        let mut centers = Array2::zeros((self.class_count, self.dimension));
        for (g, members) in groups.iter().enumerate() {
            for (j, &c) in members.iter().enumerate() {
                centers[[c, g]] = self.delta_far / std::f64::consts::SQRT_2;
                centers[[c, g_count + j]] = self.delta_near / std::f64::consts::SQRT_2;
            }
        }
        centers
    }
}

/// Samples are class-major: `per_class` rows of class 0, then class 1, ...
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let centers = spec.centers();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.class_count * spec.per_class);
    let mut labels = Vec::with_capacity(samples.capacity());
    for c in 0..spec.class_count {
        for _ in 0..spec.per_class {
            let x: Vec<f64> = (0..spec.dimension)
                .map(|k| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let spread = spec.axis_spread.get(k).copied().unwrap_or(1.0);
                    centers[[c, k]] + spec.sigma * spread * z
                })
                .collect();
            samples.push(x);
            labels.push(c);
        }
    }
    let names = (0..spec.class_count).map(|c| format!("c{c}")).collect();
    Ok(LabeledDataset::new(samples, labels, names)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn distance(c: &Array2<f64>, i: usize, j: usize) -> f64 {
        (&c.row(i) - &c.row(j)).mapv(|v| v * v).sum().sqrt()
    }

    #[test]
    fn center_distances() {
        let spec = SyntheticSpec::default();
        let c = spec.centers();
        assert!((distance(&c, 0, 1) - 1.5).abs() < 1e-12);
        assert!((distance(&c, 2, 3) - 10.0).abs() < 1e-12);
        assert!(distance(&c, 0, 2) >= 10.0);
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec { per_class: 10, seed: 9, ..Default::default() };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 40);
        assert_eq!(a.class_counts(), vec![10; 4]);
    }

    #[test]
    fn zero_per_class_is_empty() {
        let spec = SyntheticSpec { per_class: 0, ..Default::default() };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let overlap = SyntheticSpec { confusable_groups: vec![vec![0, 1], vec![1, 2]], ..Default::default() };
        assert!(overlap.validate().is_err());
        let narrow = SyntheticSpec { dimension: 3, ..Default::default() };
        assert!(narrow.validate().is_err());
        let inverted = SyntheticSpec { delta_near: 20.0, ..Default::default() };
        assert!(inverted.validate().is_err());
    }
}
