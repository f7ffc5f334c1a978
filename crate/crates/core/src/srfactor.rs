//! Symmetric rank factorizations `A = B^T B` and nonnegative certificates.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CpError, Result};
use crate::matcore::{psd_rank_from_eigen, sym_eigen, EigenDecomposition, SymmetricMatrix, Tolerances};

/// An `r x n` factor `B` of full row rank with `A = B^T B`.
///
/// Column `i` is the Gram vector of row/column `i` of `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct SrFactor {
    b: DMatrix<f64>,
}

impl SrFactor {
    /// Wraps an explicit factor. Rank is not re-checked.
    pub fn from_matrix(b: DMatrix<f64>) -> Self {
        SrFactor { b }
    }

    pub fn rank(&self) -> usize {
        self.b.nrows()
    }

    pub fn order(&self) -> usize {
        self.b.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn gram(&self) -> SymmetricMatrix {
        SymmetricMatrix::gram(&self.b)
    }

    /// `Q B` for an `r x r` matrix `Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> SrFactor {
        SrFactor { b: q * &self.b }
    }

    pub fn columns(&self, idx: &[usize]) -> DMatrix<f64> {
        self.b.select_columns(idx)
    }
}

/// Eigen-based factor `B = diag(sqrt(lambda_k)) V_r^T`.
pub fn sr_factor(a: &SymmetricMatrix, tol: &Tolerances) -> Result<SrFactor> {
    let eig = sym_eigen(a)?;
    sr_factor_from_eigen(a, &eig, tol)
}

pub fn sr_factor_from_eigen(
    a: &SymmetricMatrix,
    eig: &EigenDecomposition,
    tol: &Tolerances,
) -> Result<SrFactor> {
    let pr = psd_rank_from_eigen(eig, tol);
    if !pr.is_psd {
        return Err(CpError::precondition(format!(
            "matrix is not positive semidefinite (min eigenvalue {:e})",
            pr.min_eigenvalue
        )));
    }
    let r = pr.rank;
    let n = a.order();
    let b = DMatrix::from_fn(r, n, |k, j| {
        eig.eigenvalues[k].sqrt() * eig.eigenvectors[(j, k)]
    });
    let factor = SrFactor { b };
    let res = relative_gram_residual(a, factor.matrix());
    if res > tol.eps_residual {
        return Err(CpError::precondition(format!(
            "rank-{r} truncation leaves relative residual {res:e} above {:e}",
            tol.eps_residual
        )));
    }
    Ok(factor)
}

/// Factor from diagonally pivoted Cholesky, independent of the eigensolver.
pub fn pivoted_cholesky_factor(a: &SymmetricMatrix, tol: &Tolerances) -> Result<SrFactor> {
    let n = a.order();
    let mut work = a.as_matrix().clone();
    let scale = work.diagonal().amax().max(1.0);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        let (piv, &dmax) = (k..n)
            .map(|i| (i, &work[(perm[i], perm[i])]))
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .unwrap();
        if dmax <= tol.eps_rank * scale {
            break;
        }
        perm.swap(k, piv);
        let p = perm[k];
        let root = dmax.sqrt();
        l[(p, k)] = root;
        for &i in &perm[(k + 1)..] {
            l[(i, k)] = work[(i, p)] / root;
        }
        for &i in &perm[(k + 1)..] {
            for &j in &perm[(k + 1)..] {
                work[(i, j)] -= l[(i, k)] * l[(j, k)];
            }
        }
        rank += 1;
    }
    if work
        .diagonal()
        .iter()
        .any(|&d| d < -tol.eps_psd * scale)
    {
        return Err(CpError::precondition("matrix is not positive semidefinite"));
    }
    let b = l.columns(0, rank).transpose();
    Ok(SrFactor { b })
}

/// `||G^T G - A||_F / ||A||_F`, absolute when `A = 0`.
pub fn relative_gram_residual(a: &SymmetricMatrix, g: &DMatrix<f64>) -> f64 {
    let diff = (g.transpose() * g - a.as_matrix()).norm();
    let scale = a.frobenius_norm();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Orthogonal `Q` with `B = Q C`, taken as the polar factor of `B C^T`.
pub fn connecting_orthogonal(b: &SrFactor, c: &SrFactor, tol: &Tolerances) -> Result<DMatrix<f64>> {
    if b.rank() != c.rank() || b.order() != c.order() {
        return Err(CpError::invalid(format!(
            "factor shapes differ: {}x{} vs {}x{}",
            b.rank(),
            b.order(),
            c.rank(),
            c.order()
        )));
    }
    let gb = b.matrix().transpose() * b.matrix();
    let gc = c.matrix().transpose() * c.matrix();
    let scale = gb.norm().max(f64::MIN_POSITIVE);
    let mismatch = (&gb - &gc).norm() / scale;
    if mismatch > tol.eps_residual {
        return Err(CpError::invalid(format!(
            "factors have different Gram matrices (relative mismatch {mismatch:e})"
        )));
    }
    let cross = b.matrix() * c.matrix().transpose();
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(CpError::invalid("singular value decomposition failed")),
    };
    let q = u * v_t;
    Ok(q)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Trivial,
    Rank2Bisector,
    Rowsum,
    OrthantRotation,
    Nnq,
    FewRays,
    Kaykobad,
    HeuristicRotation,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Trivial => "trivial",
            Method::Rank2Bisector => "rank2_bisector",
            Method::Rowsum => "rowsum",
            Method::OrthantRotation => "orthant_rotation",
            Method::Nnq => "nnq",
            Method::FewRays => "few_rays",
            Method::Kaykobad => "kaykobad",
            Method::HeuristicRotation => "heuristic_rotation",
        }
    }
}

/// A nonnegative factor `C` with `A = C^T C`, plus its verification data.
#[derive(Clone, Debug)]
pub struct CpCertificate {
    /// `m x n`, entries in `[-eps_nonneg, 0)` already clamped to zero.
    pub factor: DMatrix<f64>,
    /// Relative residual after clamping.
    pub residual: f64,
    pub residual_before_clamp: f64,
    /// Smallest entry before clamping.
    pub min_entry: f64,
    pub method: Method,
}

impl CpCertificate {
    /// Clamps near-zero negatives and records residuals against `a`.
    pub fn new(a: &SymmetricMatrix, raw: DMatrix<f64>, method: Method, tol: &Tolerances) -> Self {
        let min_entry = if raw.is_empty() { 0.0 } else { raw.min() };
        let residual_before_clamp = relative_gram_residual(a, &raw);
        let factor = raw.map(|x| if x < 0.0 && x >= -tol.eps_nonneg { 0.0 } else { x });
        let residual = relative_gram_residual(a, &factor);
        CpCertificate {
            factor,
            residual,
            residual_before_clamp,
            min_entry,
            method,
        }
    }

    /// Like [`CpCertificate::new`] but fails unless the result verifies.
    pub fn verified(
        a: &SymmetricMatrix,
        raw: DMatrix<f64>,
        method: Method,
        tol: &Tolerances,
    ) -> Result<Self> {
        let cert = CpCertificate::new(a, raw, method, tol);
        let report = verify_certificate(a, &cert, tol);
        if !report.pass {
            return Err(CpError::Computation(format!(
                "{} certificate failed verification (residual {:e}, min entry {:e})",
                method.tag(),
                report.residual,
                report.min_entry
            )));
        }
        Ok(cert)
    }

    pub fn rows(&self) -> usize {
        self.factor.nrows()
    }

    /// Zero columns inserted at the positions missing from `kept`.
    pub fn reinflate(&self, kept: &[usize], n: usize, full: &SymmetricMatrix, tol: &Tolerances) -> Self {
        let mut raw = DMatrix::zeros(self.rows(), n);
        for (src, &dst) in kept.iter().enumerate() {
            raw.set_column(dst, &self.factor.column(src));
        }
        let mut cert = CpCertificate::new(full, raw, self.method, tol);
        cert.min_entry = self.min_entry;
        cert
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerificationReport {
    pub residual: f64,
    pub min_entry: f64,
    pub rows: usize,
    pub pass: bool,
}

pub fn verify_certificate(a: &SymmetricMatrix, cert: &CpCertificate, tol: &Tolerances) -> VerificationReport {
    let c = &cert.factor;
    let rows = c.nrows();
    if c.ncols() != a.order() {
        return VerificationReport {
            residual: f64::INFINITY,
            min_entry: f64::NAN,
            rows,
            pass: false,
        };
    }
    let min_entry = if c.is_empty() { 0.0 } else { c.min() };
    let residual = relative_gram_residual(a, c);
    VerificationReport {
        residual,
        min_entry,
        rows,
        pass: min_entry >= -tol.eps_nonneg && residual <= tol.eps_residual,
    }
}
