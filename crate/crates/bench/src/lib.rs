//! Fixtures shared by the benchmarks.

use robustkit::seed::splitmix64;
use robustkit::{synthetic, Embedding, Image};

/// `n` deterministic unit vectors in `dim` dimensions, clustered around one
/// direction so the enclosing ball is small, like real perturbation sets.
pub fn unit_cluster(n: usize, dim: usize, spread: f64, seed: u64) -> Vec<Embedding> {
    let mut state = seed;
    let mut uniform = move || {
        state = splitmix64(state);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let center: Vec<f64> = (0..dim).map(|_| uniform()).collect();
    (0..n)
        .map(|_| {
            let v: Vec<f64> = center.iter().map(|c| c + spread * uniform()).collect();
            Embedding::normalize(v).expect("non-zero vector")
        })
        .collect()
}

pub fn image(side: usize) -> Image {
    synthetic::smooth_image(side, side, 7)
}
