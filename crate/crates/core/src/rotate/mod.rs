//! Rotating Gram vectors into the nonnegative orthant.
//!
//! A vector whose angle with the all-ones direction `e` is small enough is
//! automatically nonnegative. Aligning a well-chosen pivot vector with `e`
//! by a Householder reflection therefore certifies every Gram vector that
//! stays close to the pivot. The row-sum test and the rank-2 construction
//! are both instances of that idea; [`small_orthant_rotation`] covers the
//! low-dimensional cases where a rotation is known to exist but has no
//! closed form.

mod search;

use nalgebra::DMatrix;

pub use search::{
    heuristic_orthant_rotation, small_orthant_rotation, OrthantRotation, SearchBudget,
    MAX_GUARANTEED_DIM,
};

use crate::error::{CpError, Result};
use crate::matcore::{classify_dn, psd_rank_from_eigen, sym_eigen, DnVerdict, SymmetricMatrix, Tolerances};
use crate::srfactor::{sr_factor_from_eigen, CpCertificate, Method, SrFactor};

/// Cosine bound `sqrt((r - 1) / r)` of the cone around `e` in `R^r`.
pub fn e_cone_threshold(r: usize) -> f64 {
    ((r as f64 - 1.0) / r as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EConeQuery {
    pub z: Vec<f64>,
    pub threshold: f64,
}

impl EConeQuery {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(CpError::invalid("query vector must have positive length"));
        }
        if z.iter().all(|&x| x == 0.0) {
            return Err(CpError::invalid("query vector must be nonzero"));
        }
        let threshold = e_cone_threshold(z.len());
        Ok(EConeQuery { z, threshold })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    /// Cosine of the angle between `z` and `e`.
    pub fn cosine(&self) -> f64 {
        let norm = self.z.iter().map(|x| x * x).sum::<f64>().sqrt();
        self.z.iter().sum::<f64>() / (norm * (self.dim() as f64).sqrt())
    }

    pub fn contains(&self) -> bool {
        let norm = self.z.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = norm * (self.dim() as f64).sqrt();
        self.z.iter().sum::<f64>() >= self.threshold * scale - 1e-14 * scale
    }
}

pub fn in_e_cone(z: &[f64]) -> Result<bool> {
    Ok(EConeQuery::new(z.to_vec())?.contains())
}

/// A vector with a negative entry whose cosine with `e` exceeds `c`,
/// showing the cone threshold cannot be lowered to `c`.
pub fn boundary_witness(r: usize, c: f64) -> Result<Vec<f64>> {
    if r < 2 {
        return Err(CpError::invalid("boundary witness needs r >= 2"));
    }
    let limit = e_cone_threshold(r);
    if !(c >= 0.0 && c < limit) {
        return Err(CpError::invalid(format!(
            "cosine {c} must lie in [0, {limit})"
        )));
    }
    let rf = r as f64;
    // Decreasing in eps on [0, 1]; positive at 0, negative at 1.
    let gap = |eps: f64| -eps + (rf - 1.0).sqrt() * (1.0 - eps * eps).sqrt() - c * rf.sqrt();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eps = 0.5 * lo;
    let mut z = vec![(1.0 - eps * eps).sqrt(); r];
    z[0] = -eps * (rf - 1.0).sqrt();
    Ok(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RotationPlan {
    pub q: DMatrix<f64>,
    /// Householder vector; `None` when `x` already points along `e`.
    pub v: Option<Vec<f64>>,
    pub x: Vec<f64>,
}

/// Orthogonal `Q` with `Q x = (|x| / sqrt(r)) e`.
pub fn householder_align(x: &[f64]) -> Result<RotationPlan> {
    let r = x.len();
    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if r == 0 || norm == 0.0 {
        return Err(CpError::invalid("pivot vector must be nonzero"));
    }
    let target = norm / (r as f64).sqrt();
    let v: Vec<f64> = x.iter().map(|a| a - target).collect();
    let vv: f64 = v.iter().map(|a| a * a).sum();
    if vv.sqrt() <= 1e-15 * norm {
        return Ok(RotationPlan {
            q: DMatrix::identity(r, r),
            v: None,
            x: x.to_vec(),
        });
    }
    let q = DMatrix::from_fn(r, r, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - 2.0 * v[i] * v[j] / vv
    });
    Ok(RotationPlan {
        q,
        v: Some(v),
        x: x.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSumData {
    pub row_sums: Vec<f64>,
    pub total: f64,
    pub diag: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSumCheck {
    pub holds: bool,
    /// First row (0-based) violating the inequality.
    pub failing_row: Option<usize>,
    pub data: RowSumData,
}

/// `r R_i^2 >= (r - 1) a_ii (R_1 + ... + R_n)` for every row, with
/// relative slack 1e-12, and every `R_i >= 0`.
pub fn rowsum_condition(a: &SymmetricMatrix, r: usize) -> RowSumCheck {
    let row_sums = a.row_sums();
    let total: f64 = row_sums.iter().sum();
    let diag = a.diagonal();
    let rf = r as f64;
    let failing_row = if !(total > 0.0) {
        Some(0)
    } else {
        (0..a.order()).find(|&i| {
            let ri = row_sums[i];
            let lhs = rf * ri * ri;
            let rhs = (rf - 1.0) * diag[i] * total;
            ri < 0.0 || lhs < rhs - 1e-12 * lhs.abs().max(rhs.abs())
        })
    };
    RowSumCheck {
        holds: failing_row.is_none(),
        failing_row,
        data: RowSumData {
            row_sums,
            total,
            diag,
        },
    }
}

/// Householder-aligns `x = B e` with the all-ones direction.
pub fn rowsum_factor(a: &SymmetricMatrix, tol: &Tolerances) -> Result<CpCertificate> {
    let eig = sym_eigen(a)?;
    let pr = psd_rank_from_eigen(&eig, tol);
    if !pr.is_psd {
        return Err(CpError::precondition("row-sum factorization needs a PSD matrix"));
    }
    let check = rowsum_condition(a, pr.rank);
    if !check.holds {
        return Err(CpError::precondition(format!(
            "row-sum condition fails at row {}",
            check.failing_row.map_or(0, |i| i + 1)
        )));
    }
    let b = sr_factor_from_eigen(a, &eig, tol)?;
    let x = b.matrix().column_sum();
    let plan = householder_align(x.as_slice())?;
    CpCertificate::verified(a, &plan.q * b.matrix(), Method::Rowsum, tol)
}

/// Rank-2 factorization by centering the fan of Gram vectors in the
/// first quadrant.
pub fn rank2_factor(a: &SymmetricMatrix, tol: &Tolerances) -> Result<CpCertificate> {
    match classify_dn(a, tol)? {
        DnVerdict::Dn { rank: 2 } => {}
        other => {
            return Err(CpError::precondition(format!(
                "rank-2 construction needs DN rank 2, got {other:?}"
            )))
        }
    }
    let eig = sym_eigen(a)?;
    let b = sr_factor_from_eigen(a, &eig, tol)?;
    let angle = fan_rotation_angle(&b, tol)?;
    let (s, c) = angle.sin_cos();
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    CpCertificate::verified(a, rot * b.matrix(), Method::Rank2Bisector, tol)
}

/// Rotation angle `pi/4 - (theta_min + theta_max) / 2` for the smallest
/// arc containing every nonzero column.
fn fan_rotation_angle(b: &SrFactor, tol: &Tolerances) -> Result<f64> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    let m = b.matrix();
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let max_norm = norms.iter().fold(0.0f64, |a, &x| a.max(x));
    let mut angles: Vec<f64> = m
        .column_iter()
        .zip(&norms)
        .filter(|(_, &nrm)| nrm > 1e-12 * max_norm)
        .map(|(c, _)| c[1].atan2(c[0]))
        .collect();
    if angles.is_empty() {
        return Ok(0.0);
    }
    angles.sort_by(|x, y| x.total_cmp(y));
    let k = angles.len();
    // The complement of the widest gap is the tightest covering arc.
    let mut gap_end = 0;
    let mut widest = angles[0] + 2.0 * PI - angles[k - 1];
    for i in 1..k {
        let g = angles[i] - angles[i - 1];
        if g > widest {
            widest = g;
            gap_end = i;
        }
    }
    let theta_min = angles[gap_end];
    let spread = 2.0 * PI - widest;
    if spread > FRAC_PI_2 + tol.eps_nonneg.max(1e-12) {
        return Err(CpError::Computation(format!(
            "Gram vectors span an angle of {spread} > pi/2"
        )));
    }
    Ok(FRAC_PI_4 - (theta_min + 0.5 * spread))
}

/// `C = Q B` with `Q` from [`small_orthant_rotation`] on the columns of `B`,
/// or the heuristic search when `heuristic` is set.
pub fn orthant_factor(
    a: &SymmetricMatrix,
    b: &SrFactor,
    budget: SearchBudget,
    seed: u64,
    tol: &Tolerances,
    heuristic: bool,
) -> Result<Option<CpCertificate>> {
    let found = if heuristic {
        heuristic_orthant_rotation(b.matrix(), budget, seed, tol.eps_nonneg)?
    } else {
        small_orthant_rotation(b.matrix(), budget, seed, tol.eps_nonneg)?
    };
    let method = if heuristic {
        Method::HeuristicRotation
    } else {
        Method::OrthantRotation
    };
    match found {
        Some(rot) => Ok(Some(CpCertificate::verified(a, &rot.q * b.matrix(), method, tol)?)),
        None => Ok(None),
    }
}
