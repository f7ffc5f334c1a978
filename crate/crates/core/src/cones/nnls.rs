//! Lawson-Hanson active set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    /// Nonnegative coefficients, one per generator column.
    pub x: DVector<f64>,
    /// `||generators x - target||_2`.
    pub residual: f64,
}

/// Minimizes `||G x - t||` over `x >= 0`, `G` holding the generators as columns.
pub fn nnls(generators: &DMatrix<f64>, target: &DVector<f64>) -> NnlsSolution {
    let k = generators.ncols();
    let mut x = DVector::zeros(k);
    if k == 0 {
        return NnlsSolution {
            residual: target.norm(),
            x,
        };
    }
    let scale = generators.amax().max(f64::MIN_POSITIVE);
    let tol = 10.0 * f64::EPSILON * scale * generators.nrows().max(k) as f64 * target.norm();
    let mut passive = vec![false; k];
    let gradient = |x: &DVector<f64>| generators.transpose() * (target - generators * x);
    let mut w = gradient(&x);

    for _ in 0..(3 * k + 10) {
        let candidate = (0..k)
            .filter(|&j| !passive[j])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(t) = candidate else { break };
        if w[t] <= tol {
            break;
        }
        passive[t] = true;

        for _ in 0..(3 * k + 10) {
            let idx: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
            let s_p = least_squares(&generators.select_columns(&idx), target);
            if idx.iter().enumerate().all(|(a, _)| s_p[a] > 0.0) {
                x.fill(0.0);
                for (a, &j) in idx.iter().enumerate() {
                    x[j] = s_p[a];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (a, &j) in idx.iter().enumerate() {
                if s_p[a] <= 0.0 {
                    let denom = x[j] - s_p[a];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            let alpha = if alpha.is_finite() { alpha } else { 0.0 };
            let mut s = DVector::zeros(k);
            for (a, &j) in idx.iter().enumerate() {
                s[j] = s_p[a];
            }
            x += (s - &x) * alpha;
            for &j in &idx {
                if x[j] <= 1e-15 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = gradient(&x);
    }
    let residual = (generators * &x - target).norm();
    NnlsSolution { x, residual }
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-13;
    svd.solve(b, cutoff).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}
