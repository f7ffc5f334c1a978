#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use cprank::SymmetricMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> SymmetricMatrix {
    let g = gaussian(n, n, rng);
    SymmetricMatrix::new((&g + g.transpose()) * 0.5, 0.0).unwrap()
}

/// `G^T G` for a Gaussian `r x n` matrix `G`.
pub fn random_psd(n: usize, r: usize, rng: &mut ChaCha8Rng) -> (SymmetricMatrix, DMatrix<f64>) {
    let g = gaussian(r, n, rng);
    (SymmetricMatrix::gram(&g), g)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Point drawn uniformly from the cone of half-angle `acos(c)` around `e`.
pub fn sample_in_cone(r: usize, c: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let e: Vec<f64> = vec![1.0 / (r as f64).sqrt(); r];
    let mut t: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let along: f64 = t.iter().zip(&e).map(|(a, b)| a * b).sum();
    for (ti, ei) in t.iter_mut().zip(&e) {
        *ti -= along * ei;
    }
    let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let max_angle = c.clamp(-1.0, 1.0).acos();
    let angle = rng.random_range(0.0..=max_angle);
    let length = rng.random_range(0.1..10.0);
    (0..r)
        .map(|i| length * (angle.cos() * e[i] + angle.sin() * t[i] / tn))
        .collect()
}
