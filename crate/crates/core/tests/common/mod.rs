#![allow(dead_code)]

use lcc_core::LabeledDataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Isotropic Gaussian blobs, `per_class` samples around each center.
pub fn blobs(centers: &[Vec<f64>], sigma: f64, per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            samples.push(center.iter().map(|m| m + noise.sample(&mut rng)).collect());
            labels.push(c);
        }
    }
    LabeledDataset::with_class_count(samples, labels, centers.len()).unwrap()
}

pub fn three_blobs(sigma: f64, per_class: usize, seed: u64) -> LabeledDataset {
    blobs(
        &[vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 5.0]],
        sigma,
        per_class,
        seed,
    )
}
