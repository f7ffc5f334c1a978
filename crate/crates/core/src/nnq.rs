//! Nonnegative-equivalent (nnq) factors.
//!
//! An `r x n` factor `B` is nnq when some invertible column block `B1`
//! gives `B1^{-1} B >= 0`. The coordinates `P = B1^{-1} B` do not depend on
//! which symmetric rank factor of `A` is used, so the test can equally be
//! run on the Gram side as `A[s,s]^{-1} A[s,:]`. When `B` is nnq and
//! `r <= 4`, a nonnegative square factor `N` of `B1^T B1` turns into the
//! certificate `C = N P`.

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CpError, Result};
use crate::fixtures::random_orthogonal;
use crate::matcore::{SymmetricMatrix, Tolerances};
use crate::rotate::{small_orthant_rotation, SearchBudget, MAX_GUARANTEED_DIM};
use crate::srfactor::{sr_factor, CpCertificate, Method, SrFactor};

/// Singularity threshold on `|det B1|`, relative to the product of its
/// column norms.
pub const EPS_DET: f64 = 1e-10;

/// Default cap on the number of index subsets examined.
pub const DEFAULT_MAX_SUBSETS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct NnqWitness {
    /// Sorted, 0-based.
    pub indices: Vec<usize>,
    pub detval: f64,
    /// `r x n`, identity on `indices`, nonnegative up to `eps_nonneg`.
    pub p: DMatrix<f64>,
    /// Square factor of the selected block: `basis^T basis = A[s,s]`.
    pub basis: DMatrix<f64>,
}

impl NnqWitness {
    pub fn indices_one_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i + 1).collect()
    }

    pub fn rank(&self) -> usize {
        self.basis.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessSearch {
    Found(NnqWitness),
    None,
    /// The subset budget ran out before the scan finished.
    NoneBudget,
}

impl WitnessSearch {
    pub fn witness(&self) -> Option<&NnqWitness> {
        match self {
            WitnessSearch::Found(w) => Some(w),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            WitnessSearch::Found(_) => "FOUND",
            WitnessSearch::None => "NONE",
            WitnessSearch::NoneBudget => "NONE_BUDGET",
        }
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn try_subset(b: &DMatrix<f64>, idx: &[usize], tol: &Tolerances) -> Option<NnqWitness> {
    let b1 = b.select_columns(idx);
    let detval = b1.determinant();
    let scale: f64 = b1.column_iter().map(|c| c.norm()).product();
    if !(detval.abs() > EPS_DET * scale) {
        return None;
    }
    let mut p = b1.clone().lu().solve(b)?;
    for (k, &j) in idx.iter().enumerate() {
        for i in 0..p.nrows() {
            p[(i, j)] = if i == k { 1.0 } else { 0.0 };
        }
    }
    if p.min() < -tol.eps_nonneg {
        return None;
    }
    Some(NnqWitness {
        indices: idx.to_vec(),
        detval,
        p,
        basis: b1,
    })
}

/// First qualifying column subset in lexicographic order.
///
/// When `C(n, r)` exceeds `max_subsets`, subsets are drawn from the
/// columns ranked by descending norm and the scan stops after
/// `max_subsets` tries with [`WitnessSearch::NoneBudget`].
pub fn find_nnq_witness(b: &SrFactor, tol: &Tolerances, max_subsets: usize) -> WitnessSearch {
    let (r, n) = (b.rank(), b.order());
    if r == 0 || r > n {
        return WitnessSearch::None;
    }
    let m = b.matrix();
    if binomial(n, r) <= max_subsets as u128 {
        for idx in (0..n).combinations(r) {
            if let Some(w) = try_subset(m, &idx, tol) {
                return WitnessSearch::Found(w);
            }
        }
        return WitnessSearch::None;
    }
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let mut ranked: Vec<usize> = (0..n).collect();
    ranked.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    for pos in (0..n).combinations(r).take(max_subsets) {
        let mut idx: Vec<usize> = pos.iter().map(|&p| ranked[p]).collect();
        idx.sort_unstable();
        if let Some(w) = try_subset(m, &idx, tol) {
            return WitnessSearch::Found(w);
        }
    }
    WitnessSearch::NoneBudget
}

/// Every qualifying subset, in lexicographic order.
pub fn qualifying_subsets(b: &SrFactor, tol: &Tolerances) -> Vec<Vec<usize>> {
    let (r, n) = (b.rank(), b.order());
    if r == 0 || r > n {
        return Vec::new();
    }
    (0..n)
        .combinations(r)
        .filter(|idx| try_subset(b.matrix(), idx, tol).is_some())
        .collect()
}

/// `A[s,s]^{-1} A[s,:]`, or `None` when the block is singular.
pub fn gram_coordinates(a: &SymmetricMatrix, idx: &[usize]) -> Option<DMatrix<f64>> {
    let block = a.principal_submatrix(idx);
    let diag_scale: f64 = block.diagonal().iter().product();
    let det = block.as_matrix().determinant();
    if !(det.abs() > EPS_DET * diag_scale) {
        return None;
    }
    let rows = a.as_matrix().select_rows(idx);
    block.into_matrix().lu().solve(&rows)
}

/// Gram-side nnq test.
///
/// Runs on the rank-`r` spectral truncation `B^T B` of `a`, so matrices
/// that are rank `r` only up to rounding behave like their exact
/// counterparts. The returned witness carries the upper Cholesky factor of
/// the selected block as its `basis`.
pub fn is_nnq_gram(a: &SymmetricMatrix, tol: &Tolerances) -> Result<Option<NnqWitness>> {
    let b = sr_factor(a, tol)?;
    let (r, n) = (b.rank(), b.order());
    if r == 0 {
        return Ok(None);
    }
    let projected = b.gram();
    for idx in (0..n).combinations(r) {
        let Some(mut p) = gram_coordinates(&projected, &idx) else {
            continue;
        };
        for (k, &j) in idx.iter().enumerate() {
            for i in 0..r {
                p[(i, j)] = if i == k { 1.0 } else { 0.0 };
            }
        }
        if p.min() < -tol.eps_nonneg {
            continue;
        }
        let block = projected.principal_submatrix(&idx).into_matrix();
        let detval = block.determinant();
        let Some(chol) = block.cholesky() else {
            continue;
        };
        return Ok(Some(NnqWitness {
            indices: idx,
            detval,
            p,
            basis: chol.l().transpose(),
        }));
    }
    Ok(None)
}

/// Nonnegative `N` with `N^T N = basis^T basis`.
///
/// Tries the triangular factor first and falls back to the orthant
/// rotation search on the basis columns.
fn nonnegative_block_factor(
    basis: &DMatrix<f64>,
    budget: SearchBudget,
    seed: u64,
    tol: &Tolerances,
) -> Result<DMatrix<f64>> {
    let gram = basis.transpose() * basis;
    if let Some(chol) = gram.cholesky() {
        let upper = chol.l().transpose();
        if upper.min() >= -tol.eps_nonneg {
            return Ok(upper);
        }
    }
    match small_orthant_rotation(basis, budget, seed, tol.eps_nonneg)? {
        Some(rot) => Ok(&rot.q * basis),
        None => Err(CpError::Computation(format!(
            "no orthant rotation found for the {}x{} basis within {} restarts",
            basis.nrows(),
            basis.ncols(),
            budget.restarts
        ))),
    }
}

/// `C = N P` with `N` a nonnegative factor of the witness block.
pub fn nnq_factor(
    a: &SymmetricMatrix,
    witness: &NnqWitness,
    tol: &Tolerances,
    seed: u64,
    budget: SearchBudget,
) -> Result<CpCertificate> {
    let r = witness.rank();
    if r > MAX_GUARANTEED_DIM {
        return Err(CpError::UnsupportedRank {
            rank: r,
            max: MAX_GUARANTEED_DIM,
        });
    }
    if witness.p.ncols() != a.order() {
        return Err(CpError::invalid("witness does not match the matrix order"));
    }
    let n_block = nonnegative_block_factor(&witness.basis, budget, seed, tol)?;
    CpCertificate::verified(a, n_block * &witness.p, Method::Nnq, tol)
}

/// Compares the qualifying subset families of two independently built
/// factors: the eigen-based one and a random orthogonal mix of it.
pub fn nnq_invariance_check(a: &SymmetricMatrix, tol: &Tolerances, seed: u64) -> Result<bool> {
    let b = sr_factor(a, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(b.rank(), &mut rng);
    let mixed = b.rotated(&q);
    Ok(qualifying_subsets(&b, tol) == qualifying_subsets(&mixed, tol))
}
