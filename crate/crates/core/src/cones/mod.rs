//! Extreme rays of the cone spanned by the Gram vectors, and
//! factorizations built from them when there are few.

mod nnls;

pub use nnls::{nnls, NnlsSolution};

use nalgebra::{DMatrix, DVector};

use crate::error::{CpError, Result};
use crate::matcore::{classify_dn, DnVerdict, SymmetricMatrix, Tolerances};
use crate::nnq::{is_nnq_gram, nnq_factor, NnqWitness};
use crate::rotate::{small_orthant_rotation, SearchBudget, MAX_GUARANTEED_DIM};
use crate::srfactor::{sr_factor, CpCertificate, Method};

/// Cosine at which two columns count as the same ray.
pub const SAME_RAY_COSINE: f64 = 1.0 - 1e-12;
/// NNLS residual, relative to the column norm, above which a column is extreme.
pub const EXTREME_THRESHOLD: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq)]
pub struct ConeReport {
    /// Number of extreme rays.
    pub m: usize,
    /// 0-based column indices, one per ray, ascending.
    pub extreme_indices: Vec<usize>,
    /// `m x n` nonnegative weights with `V = V[:, extreme] W`.
    pub w: DMatrix<f64>,
    /// Relative Frobenius error of that reconstruction.
    pub residual: f64,
}

impl ConeReport {
    pub fn extreme_one_based(&self) -> Vec<usize> {
        self.extreme_indices.iter().map(|i| i + 1).collect()
    }
}

/// Extreme rays of the cone generated by the columns of `v`.
///
/// Zero columns are ignored and parallel columns collapse to the first
/// one seen.
pub fn extreme_rays_of_columns(v: &DMatrix<f64>) -> ConeReport {
    let n = v.ncols();
    let norms: Vec<f64> = v.column_iter().map(|c| c.norm()).collect();
    let max_norm = norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let nonzero: Vec<usize> = (0..n).filter(|&j| norms[j] > 1e-12 * max_norm).collect();

    let mut reps: Vec<usize> = Vec::new();
    for &j in &nonzero {
        let duplicate = reps.iter().any(|&i| {
            v.column(i).dot(&v.column(j)) / (norms[i] * norms[j]) >= SAME_RAY_COSINE
        });
        if !duplicate {
            reps.push(j);
        }
    }

    let extreme: Vec<usize> = reps
        .iter()
        .copied()
        .filter(|&j| {
            let others: Vec<usize> = reps.iter().copied().filter(|&i| i != j).collect();
            if others.is_empty() {
                return true;
            }
            let target: DVector<f64> = v.column(j).into_owned();
            nnls(&v.select_columns(&others), &target).residual > EXTREME_THRESHOLD * norms[j]
        })
        .collect();

    let gens = v.select_columns(&extreme);
    let mut w = DMatrix::zeros(extreme.len(), n);
    for &j in &nonzero {
        if let Some(pos) = extreme.iter().position(|&e| e == j) {
            w[(pos, j)] = 1.0;
        } else {
            let sol = nnls(&gens, &v.column(j).into_owned());
            w.set_column(j, &sol.x);
        }
    }
    let total = v.norm();
    let residual = if total > 0.0 {
        (v - &gens * &w).norm() / total
    } else {
        0.0
    };
    ConeReport {
        m: extreme.len(),
        extreme_indices: extreme,
        w,
        residual,
    }
}

/// Extreme rays of the column cone of `a`.
///
/// The analysis runs on the Gram vectors (columns of an SR factor), which
/// span the same cone up to an isometry. This keeps rounding noise in
/// nearly low-rank inputs from creating spurious rays.
pub fn extreme_rays(a: &SymmetricMatrix, tol: &Tolerances) -> Result<ConeReport> {
    let b = sr_factor(a, tol)?;
    Ok(extreme_rays_of_columns(b.matrix()))
}

/// `C = N W` from a nonnegative rotation `N` of the extreme Gram vectors.
///
/// Tries the smallest dimension first (the rank) and pads with zero rows
/// up to `m`, where a solution exists whenever `m <= 4`.
pub fn few_rays_factor(
    a: &SymmetricMatrix,
    report: &ConeReport,
    tol: &Tolerances,
    seed: u64,
    budget: SearchBudget,
) -> Result<CpCertificate> {
    let m = report.m;
    if m > MAX_GUARANTEED_DIM {
        return Err(CpError::precondition(format!(
            "{m} extreme rays; at most {MAX_GUARANTEED_DIM} supported"
        )));
    }
    if report.w.ncols() != a.order() {
        return Err(CpError::invalid("cone report does not match the matrix order"));
    }
    let b = sr_factor(a, tol)?;
    let r = b.rank();
    if m == 0 {
        return CpCertificate::verified(a, DMatrix::zeros(0, a.order()), Method::FewRays, tol);
    }
    let ext = b.columns(&report.extreme_indices);
    for d in r.max(1)..=m {
        let mut padded = DMatrix::zeros(d, m);
        padded.view_mut((0, 0), (r, m)).copy_from(&ext);
        if let Some(rot) = small_orthant_rotation(&padded, budget, seed, tol.eps_nonneg)? {
            let n_block = &rot.q * &padded;
            return CpCertificate::verified(a, n_block * &report.w, Method::FewRays, tol);
        }
    }
    Err(CpError::Computation(format!(
        "no nonnegative rotation of the {m} extreme rays found within {} restarts",
        budget.restarts
    )))
}

#[derive(Clone, Debug)]
pub enum Rank3Decision {
    InCpN3 {
        certificate: CpCertificate,
        witness: NnqWitness,
    },
    NotInCpN3,
    NotApplicable(String),
}

impl Rank3Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Rank3Decision::InCpN3 { .. } => "IN_CP_N3",
            Rank3Decision::NotInCpN3 => "NOT_IN_CP_N3",
            Rank3Decision::NotApplicable(_) => "NOT_APPLICABLE",
        }
    }
}

/// Decides membership in CP(n, 3) for a rank 3 DN matrix whose column cone
/// has exactly three extreme rays.
pub fn decide_cp_n3(
    a: &SymmetricMatrix,
    tol: &Tolerances,
    seed: u64,
    budget: SearchBudget,
) -> Result<Rank3Decision> {
    match classify_dn(a, tol)? {
        DnVerdict::Dn { rank: 3 } => {}
        other => {
            return Ok(Rank3Decision::NotApplicable(format!(
                "requires a rank 3 DN matrix, got {}",
                other.label()
            )))
        }
    }
    let report = extreme_rays(a, tol)?;
    if report.m != 3 {
        return Ok(Rank3Decision::NotApplicable(format!(
            "column cone has {} extreme rays, not 3",
            report.m
        )));
    }
    match is_nnq_gram(a, tol)? {
        Some(witness) => {
            let certificate = nnq_factor(a, &witness, tol, seed, budget)?;
            Ok(Rank3Decision::InCpN3 {
                certificate,
                witness,
            })
        }
        None => Ok(Rank3Decision::NotInCpN3),
    }
}
