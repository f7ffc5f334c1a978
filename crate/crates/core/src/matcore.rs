//! Dense symmetric matrix kernel.
//!
//! Everything downstream works on [`SymmetricMatrix`] values and decides
//! semidefiniteness, rank and entrywise nonnegativity through the
//! thresholds carried by [`Tolerances`].

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CpError, Result};

/// Numerical thresholds shared by every decision procedure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Relative asymmetry accepted (and symmetrized away) on input.
    pub eps_sym: f64,
    /// Eigenvalue floor, relative to `max(1, |lambda_max|)`.
    pub eps_psd: f64,
    /// Eigenvalues with absolute value above `eps_rank * max(1, |lambda_max|)` count toward the rank.
    pub eps_rank: f64,
    /// Absolute slack for entrywise nonnegativity.
    pub eps_nonneg: f64,
    /// Relative Frobenius residual accepted for certificates.
    pub eps_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_sym: 1e-10,
            eps_psd: 1e-9,
            eps_rank: 1e-9,
            eps_nonneg: 1e-9,
            eps_residual: 1e-8,
        }
    }
}

impl Tolerances {
    /// Thresholds for matrices whose entries were rounded to a few decimals.
    ///
    /// Rounding a rank-deficient matrix to four decimals leaves spurious
    /// eigenvalues of order 1e-4 relative; these settings absorb them.
    pub fn printed_precision() -> Self {
        Tolerances {
            eps_psd: 1e-4,
            eps_rank: 1e-4,
            eps_residual: 1e-4,
            ..Tolerances::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eps_sym", self.eps_sym),
            ("eps_psd", self.eps_psd),
            ("eps_rank", self.eps_rank),
            ("eps_nonneg", self.eps_nonneg),
            ("eps_residual", self.eps_residual),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value < 1.0) {
                return Err(CpError::invalid(format!(
                    "tolerance {name} = {value} must lie in (0, 1)"
                )));
            }
        }
        Ok(())
    }
}

/// Dense symmetric matrix, stored in full.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix {
    data: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Builds a symmetric matrix, symmetrizing `(A + A^T) / 2` when the
    /// relative asymmetry is at most `eps_sym`.
    pub fn new(data: DMatrix<f64>, eps_sym: f64) -> Result<Self> {
        let n = data.nrows();
        if n == 0 {
            return Err(CpError::invalid("matrix order must be at least 1"));
        }
        if data.ncols() != n {
            return Err(CpError::invalid(format!(
                "matrix is {}x{}, expected square",
                n,
                data.ncols()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CpError::invalid("matrix has non-finite entries"));
        }
        let defect = symmetry_defect(&data);
        if defect > eps_sym {
            return Err(CpError::invalid(format!(
                "relative asymmetry {defect:e} exceeds {eps_sym:e}"
            )));
        }
        let sym = if defect == 0.0 {
            data
        } else {
            (&data + data.transpose()) * 0.5
        };
        Ok(SymmetricMatrix { data: sym })
    }

    /// Builds from row slices with the default symmetry tolerance.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(CpError::invalid("rows must all have length equal to the row count"));
        }
        let data = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        SymmetricMatrix::new(data, Tolerances::default().eps_sym)
    }

    pub fn identity(n: usize) -> Self {
        SymmetricMatrix {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymmetricMatrix {
            data: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// Gram matrix `G^T G` of the columns of `g`.
    pub fn gram(g: &DMatrix<f64>) -> Self {
        let a = g.transpose() * g;
        let sym = (&a + a.transpose()) * 0.5;
        SymmetricMatrix { data: sym }
    }

    pub fn order(&self) -> usize {
        self.data.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.data[(i, i)]).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.amax()
    }

    pub fn trace(&self) -> f64 {
        self.data.trace()
    }

    pub fn min_entry(&self) -> f64 {
        self.data.min()
    }

    pub fn is_nonnegative(&self, slack: f64) -> bool {
        self.data.iter().all(|&x| x >= -slack)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.row_iter().map(|r| r.sum()).collect()
    }

    pub fn principal_submatrix(&self, idx: &[usize]) -> SymmetricMatrix {
        let k = idx.len();
        SymmetricMatrix {
            data: DMatrix::from_fn(k, k, |i, j| self.data[(idx[i], idx[j])]),
        }
    }

    pub fn scaled(&self, factor: f64) -> SymmetricMatrix {
        SymmetricMatrix {
            data: &self.data * factor,
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

/// `max |a_ij - a_ji| / max |a_ij|`, zero for the zero matrix.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 || m.nrows() != m.ncols() {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Column `k` pairs with `eigenvalues[k]`; largest-magnitude entry of
    /// each column is positive.
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let lambda = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        v * lambda * v.transpose()
    }
}

const MAX_SWEEPS: usize = 100;

/// Symmetric eigendecomposition by cyclic Jacobi sweeps.
pub fn sym_eigen(a: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = a.order();
    let mut m = a.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let norm = m.norm();

    let mut sweep = 0;
    while norm > 0.0 && n > 1 {
        if sweep == MAX_SWEEPS {
            return Err(CpError::Computation(format!(
                "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweep += 1;

        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= f64::EPSILON * norm * 0.1 {
            break;
        }

        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                // Negligible against both diagonal entries after a few sweeps.
                if sweep > 4
                    && apq.abs() * 1e18 < app.abs()
                    && apq.abs() * 1e18 < aqq.abs()
                {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = m[(r, p)];
                    let arq = m[(r, q)];
                    let new_rp = arp - s * (arq + tau * arp);
                    let new_rq = arq + s * (arp - tau * arq);
                    m[(r, p)] = new_rp;
                    m[(p, r)] = new_rp;
                    m[(r, q)] = new_rq;
                    m[(q, r)] = new_rq;
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&k| m[(k, k)]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = v.column(src).clone_owned();
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsdRank {
    pub is_psd: bool,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub max_abs_eigenvalue: f64,
}

/// Eigenvalue scale used by the relative PSD and rank thresholds.
pub fn eigen_scale(eig: &EigenDecomposition) -> f64 {
    eig.max_abs_eigenvalue().max(1.0)
}

pub fn psd_rank_from_eigen(eig: &EigenDecomposition, tol: &Tolerances) -> PsdRank {
    let scale = eigen_scale(eig);
    let min_eigenvalue = eig.eigenvalues.last().copied().unwrap_or(0.0);
    PsdRank {
        is_psd: min_eigenvalue >= -tol.eps_psd * scale,
        rank: eig
            .eigenvalues
            .iter()
            .filter(|&&l| l.abs() > tol.eps_rank * scale)
            .count(),
        min_eigenvalue,
        max_abs_eigenvalue: eig.max_abs_eigenvalue(),
    }
}

pub fn psd_rank(a: &SymmetricMatrix, tol: &Tolerances) -> Result<PsdRank> {
    Ok(psd_rank_from_eigen(&sym_eigen(a)?, tol))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DnVerdict {
    NotNonnegative,
    NotPsd,
    Dn { rank: usize },
}

impl DnVerdict {
    pub fn rank(&self) -> Option<usize> {
        match self {
            DnVerdict::Dn { rank } => Some(*rank),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DnVerdict::NotNonnegative => "NOT_NONNEGATIVE",
            DnVerdict::NotPsd => "NOT_PSD",
            DnVerdict::Dn { .. } => "DN",
        }
    }
}

pub fn classify_dn(a: &SymmetricMatrix, tol: &Tolerances) -> Result<DnVerdict> {
    if !a.is_nonnegative(tol.eps_nonneg) {
        return Ok(DnVerdict::NotNonnegative);
    }
    let pr = psd_rank(a, tol)?;
    Ok(if pr.is_psd {
        DnVerdict::Dn { rank: pr.rank }
    } else {
        DnVerdict::NotPsd
    })
}

/// `M(A) = 2 D(A) - A`: diagonal kept, off-diagonal negated.
pub fn comparison_matrix(a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if let Some(x) = a.as_matrix().iter().find(|&&x| x < 0.0) {
        return Err(CpError::invalid(format!(
            "comparison matrix needs a nonnegative matrix, found entry {x}"
        )));
    }
    let n = a.order();
    let data = DMatrix::from_fn(n, n, |i, j| if i == j { a.get(i, j) } else { -a.get(i, j) });
    Ok(SymmetricMatrix { data })
}

/// `D^{-1/2} A D^{-1/2}` together with the diagonal `d` of `A`.
pub fn unit_diagonal_scaling(a: &SymmetricMatrix) -> Result<(SymmetricMatrix, Vec<f64>)> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(CpError::precondition(format!(
            "diagonal entry {} is {}, deflate zero rows before scaling",
            i + 1,
            d[i]
        )));
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    let n = a.order();
    let mut data = DMatrix::from_fn(n, n, |i, j| a.get(i, j) * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..n {
        data[(i, i)] = 1.0;
    }
    Ok((SymmetricMatrix { data }, d))
}

/// Undo [`unit_diagonal_scaling`].
pub fn unscale(scaled: &SymmetricMatrix, d: &[f64]) -> SymmetricMatrix {
    let n = scaled.order();
    let data = DMatrix::from_fn(n, n, |i, j| scaled.get(i, j) * d[i].sqrt() * d[j].sqrt());
    SymmetricMatrix { data }
}
