//! Multi-start search for an orthogonal `Q` with `Q v_i >= 0`.
//!
//! `Q` is parametrized as a product of Givens rotations (one angle per
//! coordinate plane) applied after a fixed starting matrix. Each start runs
//! Nelder-Mead on the squared negative part of `Q V`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CpError, Result};
use crate::rotate::householder_align;

/// Largest dimension for which DN = CP guarantees a solution.
pub const MAX_GUARANTEED_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            restarts: 200,
            iterations: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrthantRotation {
    pub q: DMatrix<f64>,
    /// Index of the successful start.
    pub restart: usize,
    /// Smallest entry of `Q V` on the caller's scale.
    pub min_entry: f64,
}

/// Finds `Q` with `Q v_i >= -eps_nonneg` for the columns of `vectors`
/// (dimension at most 4), or `None` once the budget is spent.
pub fn small_orthant_rotation(
    vectors: &DMatrix<f64>,
    budget: SearchBudget,
    seed: u64,
    eps_nonneg: f64,
) -> Result<Option<OrthantRotation>> {
    if vectors.nrows() > MAX_GUARANTEED_DIM {
        return Err(CpError::precondition(format!(
            "dimension {} exceeds {MAX_GUARANTEED_DIM}; use the heuristic search",
            vectors.nrows()
        )));
    }
    orthant_search(vectors, budget, seed, eps_nonneg)
}

/// Same search without the dimension cap. Failure proves nothing.
pub fn heuristic_orthant_rotation(
    vectors: &DMatrix<f64>,
    budget: SearchBudget,
    seed: u64,
    eps_nonneg: f64,
) -> Result<Option<OrthantRotation>> {
    orthant_search(vectors, budget, seed, eps_nonneg)
}

fn orthant_search(
    vectors: &DMatrix<f64>,
    budget: SearchBudget,
    seed: u64,
    eps_nonneg: f64,
) -> Result<Option<OrthantRotation>> {
    let d = vectors.nrows();
    if d == 0 {
        return Err(CpError::invalid("vectors must have positive dimension"));
    }
    let norms: Vec<f64> = vectors.column_iter().map(|c| c.norm()).collect();
    let max_norm = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let kept: Vec<usize> = (0..vectors.ncols())
        .filter(|&j| norms[j] > 1e-14 * max_norm)
        .collect();
    for (a, &i) in kept.iter().enumerate() {
        for &j in &kept[(a + 1)..] {
            let cos = vectors.column(i).dot(&vectors.column(j)) / (norms[i] * norms[j]);
            if cos < -eps_nonneg {
                return Err(CpError::invalid(format!(
                    "vectors {} and {} have negative inner product (cosine {cos:e})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    if kept.is_empty() {
        return Ok(Some(OrthantRotation {
            q: DMatrix::identity(d, d),
            restart: 0,
            min_entry: 0.0,
        }));
    }

    let mut unit = vectors.select_columns(&kept);
    for (mut col, &j) in unit.column_iter_mut().zip(&kept) {
        col /= norms[j];
    }
    // Success is judged on the caller's scale.
    let tol_unit = eps_nonneg / max_norm.max(1.0);
    let accept = |q: &DMatrix<f64>| -> Option<f64> {
        let min = (q * vectors).min();
        (min >= -eps_nonneg).then_some(min)
    };

    if d == 1 {
        let q = if unit.min() >= -tol_unit {
            DMatrix::identity(1, 1)
        } else {
            -DMatrix::<f64>::identity(1, 1)
        };
        return Ok(accept(&q).map(|min_entry| OrthantRotation {
            q,
            restart: 0,
            min_entry,
        }));
    }

    let n_angles = d * (d - 1) / 2;
    let target = (0.25 * tol_unit).powi(2);
    let objective = |base: &DMatrix<f64>, theta: &[f64]| -> f64 {
        let mut m = base.clone();
        apply_givens(&mut m, theta);
        m.iter().map(|&x| if x < 0.0 { x * x } else { 0.0 }).sum()
    };

    for restart in 0..budget.restarts {
        let (start, theta0) = starting_point(restart, &unit, n_angles, seed)?;
        let base = &start * &unit;
        let (theta, _) = nelder_mead(
            |t| objective(&base, t),
            &theta0,
            0.3,
            budget.iterations,
            target,
        );
        let mut q = start;
        apply_givens(&mut q, &theta);
        if let Some(min_entry) = accept(&q) {
            return Ok(Some(OrthantRotation {
                q,
                restart,
                min_entry,
            }));
        }
    }
    Ok(None)
}

fn starting_point(
    restart: usize,
    unit: &DMatrix<f64>,
    n_angles: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let d = unit.nrows();
    match restart {
        0 => Ok((DMatrix::identity(d, d), vec![0.0; n_angles])),
        1 => {
            let pivot: DVector<f64> = unit.column_sum();
            let q = if pivot.norm() > 0.0 {
                householder_align(pivot.as_slice())?.q
            } else {
                DMatrix::identity(d, d)
            };
            Ok((q, vec![0.0; n_angles]))
        }
        _ => {
            let mut rng = restart_rng(seed, restart);
            let theta = (0..n_angles)
                .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                .collect();
            Ok((DMatrix::identity(d, d), theta))
        }
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Left-multiplies `m` by `G_{p,q}(theta_k)` for each plane in order.
pub(crate) fn apply_givens(m: &mut DMatrix<f64>, theta: &[f64]) {
    let d = m.nrows();
    let mut k = 0;
    for p in 0..d {
        for q in (p + 1)..d {
            let (s, c) = theta[k].sin_cos();
            k += 1;
            if s == 0.0 && c == 1.0 {
                continue;
            }
            for j in 0..m.ncols() {
                let a = m[(p, j)];
                let b = m[(q, j)];
                m[(p, j)] = c * a - s * b;
                m[(q, j)] = s * a + c * b;
            }
        }
    }
}

/// Plain Nelder-Mead. Stops when the best value reaches `target`, the
/// simplex collapses, or `max_iter` iterations have run.
pub(crate) fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_iter: usize, target: f64) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if values[0] <= target {
            break;
        }
        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-15 || (spread <= 1e-300 && size < 1e-9) {
            break;
        }

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = toward(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = toward(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[n] {
            let x = toward(-0.5);
            let v = f(&x);
            (x, v)
        } else {
            let x = toward(0.5);
            let v = f(&x);
            (x, v)
        };
        if fc < values[n].min(fr) {
            simplex[n] = contracted;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            for (x, b) in simplex[i].iter_mut().zip(&best) {
                *x = b + 0.5 * (*x - b);
            }
            values[i] = f(&simplex[i]);
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}
