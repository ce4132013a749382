//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use faer::Mat;
use mcse_core::measgen::{apply_fad_mask, MeasurementMatrix, M};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Rank-1 `n × 5` matrix `abᵀ` with entries of `a` and `b` in `[0.5, 1.5]`.
pub fn rank_one(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let b: Vec<f64> = (0..M).map(|_| rng.random_range(0.5..1.5)).collect();
    (0..n * M).map(|e| a[e / M] * b[e % M]).collect()
}

/// Noise-free measurement matrix observing a `fad` share of `truth`.
pub fn observe(n: usize, truth: Vec<f64>, fad: f64, seed: u64) -> MeasurementMatrix {
    let psi = apply_fad_mask(n, fad, seed).unwrap();
    MeasurementMatrix::from_truth(n, truth, psi).unwrap()
}

pub fn rel_frobenius(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Nuclear norm of a row-major `rows × cols` matrix from its SVD.
pub fn nuclear_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    let m = Mat::<f64>::from_fn(rows, cols, |i, j| a[i * cols + j]);
    m.singular_values().unwrap().iter().sum()
}

/// 60% mask with three observed entries per row and six per column, each
/// row drawing from the columns with the most remaining room.
pub fn balanced_mask(seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut room = [6usize; M];
    let mut psi = Vec::with_capacity(30);
    for i in 0..10 {
        let mut cols: Vec<(usize, f64, usize)> = (0..M).map(|j| (room[j], rng.random::<f64>(), j)).collect();
        cols.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
        let mut pick: Vec<usize> = cols[..3].iter().map(|c| c.2).collect();
        pick.sort_unstable();
        for j in pick {
            room[j] -= 1;
            psi.push((i, j));
        }
    }
    psi
}

/// Rank-1 10 × 5 instance observed through [`balanced_mask`].
pub fn rank_one_instance(seed: u64) -> (Vec<f64>, MeasurementMatrix) {
    let truth = rank_one(10, seed);
    let meas = MeasurementMatrix::from_truth(10, truth.clone(), balanced_mask(seed)).unwrap();
    (truth, meas)
}

/// Unit eigenvector of the largest eigenvalue of a symmetric row-major matrix.
pub fn top_eigenvector(a: &[f64], n: usize) -> Vec<f64> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let evd = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
    (0..n).map(|i| evd.U()[(i, n - 1)]).collect()
}

pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() / (na * nb)
}
