//! Synthetic data in the cardiotocography column layout.

#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use npclass::data::CTG_FEATURES;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Class shares close to the real data: Normal, Suspect, Pathologic.
pub const SHARES: [f64; 3] = [0.78, 0.14, 0.08];

/// `n` rows driven by a three-dimensional latent factor whose mean depends on
/// the class, spread over the 21 features with per-feature noise.
pub fn ctg_like_csv(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let loadings: Vec<[f64; 3]> = (0..CTG_FEATURES.len())
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let centers = [[0.0, 0.0, 0.0], [2.0, -1.0, 0.5], [-1.5, 2.0, 1.5]];
    let mut out = CTG_FEATURES.join(",");
    out.push_str(",NSP\n");
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let class = if u < SHARES[0] { 0 } else if u < SHARES[0] + SHARES[1] { 1 } else { 2 };
        let latent: Vec<f64> = (0..3).map(|k| centers[class][k] + noise.sample(&mut rng)).collect();
        for (j, l) in loadings.iter().enumerate() {
            let v = 10.0 * (j as f64 + 1.0)
                + (0..3).map(|k| l[k] * latent[k]).sum::<f64>() * 3.0
                + 0.5 * noise.sample(&mut rng);
            write!(out, "{v:.4},").unwrap();
        }
        writeln!(out, "{}", class + 1).unwrap();
    }
    out
}

pub fn write_ctg_like(path: &Path, n: usize, seed: u64) {
    std::fs::write(path, ctg_like_csv(n, seed)).unwrap();
}
