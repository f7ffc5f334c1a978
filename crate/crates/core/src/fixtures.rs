//! Named example matrices and random instance generators.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CpError, Result};
use crate::matcore::{psd_rank, SymmetricMatrix, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PaperExample {
    /// 4-cycle pattern, DN(4,3) but cp-rank 4.
    Ex1_2,
    Ex2_7,
    Ex2_8,
    /// K_{2,3} pattern, cp-rank 6.
    Ex3_3,
    /// In CP(4,3) without an nnq factor.
    Ex3_7,
    /// Printed to four decimals.
    Ex3_9,
}

impl PaperExample {
    pub const ALL: [PaperExample; 6] = [
        PaperExample::Ex1_2,
        PaperExample::Ex2_7,
        PaperExample::Ex2_8,
        PaperExample::Ex3_3,
        PaperExample::Ex3_7,
        PaperExample::Ex3_9,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            PaperExample::Ex1_2 => "EX1_2",
            PaperExample::Ex2_7 => "EX2_7",
            PaperExample::Ex2_8 => "EX2_8",
            PaperExample::Ex3_3 => "EX3_3",
            PaperExample::Ex3_7 => "EX3_7",
            PaperExample::Ex3_9 => "EX3_9",
        }
    }

    /// Thresholds suited to how the entries were printed.
    pub fn tolerances(&self) -> Tolerances {
        match self {
            PaperExample::Ex3_9 => Tolerances::printed_precision(),
            _ => Tolerances::default(),
        }
    }
}

impl fmt::Display for PaperExample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PaperExample {
    type Err = CpError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace(['.', '-'], "_");
        PaperExample::ALL
            .into_iter()
            .find(|e| e.id() == key)
            .ok_or_else(|| CpError::UnknownFixture(s.to_string()))
    }
}

fn square(n: usize, entries: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, entries)
}

/// The example matrix, entries exactly as printed.
pub fn paper_matrix(id: PaperExample) -> SymmetricMatrix {
    let data = match id {
        PaperExample::Ex1_2 => square(
            4,
            &[
                2.0, 1.0, 0.0, 1.0, //
                1.0, 2.0, 1.0, 0.0, //
                0.0, 1.0, 2.0, 1.0, //
                1.0, 0.0, 1.0, 2.0,
            ],
        ),
        PaperExample::Ex2_7 => square(
            4,
            &[
                93.0, 27.0, 55.0, 45.0, //
                27.0, 45.0, 33.0, 51.0, //
                55.0, 33.0, 41.0, 43.0, //
                45.0, 51.0, 43.0, 62.0,
            ],
        ),
        PaperExample::Ex2_8 => square(
            5,
            &[
                41.0, 43.0, 80.0, 56.0, 50.0, //
                43.0, 62.0, 89.0, 78.0, 51.0, //
                80.0, 89.0, 162.0, 120.0, 93.0, //
                56.0, 78.0, 120.0, 104.0, 62.0, //
                50.0, 51.0, 93.0, 62.0, 65.0,
            ],
        ),
        PaperExample::Ex3_3 => square(
            5,
            &[
                3.0, 0.0, 1.0, 1.0, 1.0, //
                0.0, 6.0, 1.0, 1.0, 2.0, //
                1.0, 1.0, 2.0, 0.0, 0.0, //
                1.0, 1.0, 0.0, 2.0, 0.0, //
                1.0, 2.0, 0.0, 0.0, 2.0,
            ],
        ),
        PaperExample::Ex3_7 => square(
            4,
            &[
                1.0, 1.0, 1.0, 1.0, //
                1.0, 2.0, 1.0, 2.0, //
                1.0, 1.0, 2.0, 2.0, //
                1.0, 2.0, 2.0, 3.0,
            ],
        ),
        PaperExample::Ex3_9 => square(
            5,
            &[
                1.2295, 0.4315, 0.0699, 0.7037, 1.3685, //
                0.4315, 0.3006, 0.0435, 0.4241, 0.7177, //
                0.0699, 0.0435, 0.0078, 0.0743, 0.1098, //
                0.7037, 0.4241, 0.0743, 0.7128, 1.0795, //
                1.3685, 0.7177, 0.1098, 1.0795, 1.9030,
            ],
        ),
    };
    SymmetricMatrix::new(data, 0.0).expect("example matrices are symmetric")
}

/// Nonnegative `3 x 4` factor printed alongside the rank 3 example with no nnq factor.
pub fn ex3_7_printed_c() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        4,
        &[
            1.0, 1.0, 1.0, 1.0, //
            0.0, 0.0, 1.0, 1.0, //
            0.0, 1.0, 0.0, 1.0,
        ],
    )
}

/// Signed symmetric rank factor printed for the same matrix.
pub fn ex3_7_printed_b() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        4,
        &[
            0.6426, 0.1008, 0.1008, -0.4409, //
            0.0, 0.7071, -0.7071, 0.0, //
            0.7662, 1.2206, 1.2206, 1.6750,
        ],
    )
}

/// Eigen-based factor printed for the four-decimal example.
pub fn ex3_9_printed_b() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        5,
        &[
            1.0272, 0.5025, 0.0795, 0.7824, 1.3729, //
            -0.4151, 0.1924, 0.0309, 0.2604, 0.0900, //
            -0.0450, 0.1053, -0.0224, -0.1814, 0.0998,
        ],
    )
}

/// Printed coordinates `B1^{-1} B` for the four-decimal example.
pub fn ex3_9_printed_p() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        5,
        &[
            1.0, 0.0, 0.0, 0.0526, 0.5396, //
            0.0, 1.0, 0.0, 0.1055, 1.4368, //
            0.0, 0.0, 1.0, 8.4895, 1.2159,
        ],
    )
}

/// Printed nonnegative factor for the four-decimal example.
pub fn ex3_9_printed_c() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        5,
        &[
            0.1278, 0.4274, 0.0587, 0.5505, 0.7545, //
            0.6399, 0.1758, 0.0602, 0.5631, 0.6711, //
            0.8965, 0.2949, 0.0267, 0.3046, 0.9398,
        ],
    )
}

/// Printed Gram-side coordinates `A11^{-1} A1` for the same matrix.
pub fn ex3_12_printed_p() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        5,
        &[
            1.0, 0.0, 0.0, 0.0538, 0.5388, //
            0.0, 1.0, 0.0, 0.1291, 1.4292, //
            0.0, 0.0, 1.0, 8.3229, 1.2776,
        ],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoulesBasis {
    /// Orthogonal, first column `w / |w|`.
    pub s: DMatrix<f64>,
    pub w: Vec<f64>,
}

/// Soules basis for the chain partition `{1..n} > {2..n} > ... > {n}`.
///
/// Column `k` is supported on `{k-1, ..., n}`: positive on `k-1`,
/// negative on the tail, and orthogonal to `w` there.
pub fn soules_basis(w: &[f64]) -> Result<SoulesBasis> {
    let n = w.len();
    if n == 0 {
        return Err(CpError::invalid("weight vector is empty"));
    }
    if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(CpError::invalid("weight vector must be strictly positive"));
    }
    let mut s = DMatrix::zeros(n, n);
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    for i in 0..n {
        s[(i, 0)] = w[i] / norm;
    }
    for k in 1..n {
        let head = w[k - 1] * w[k - 1];
        let tail: f64 = w[k..].iter().map(|x| x * x).sum();
        let scale = (head * tail * (head + tail)).sqrt();
        s[(k - 1, k)] = tail * w[k - 1] / scale;
        for i in k..n {
            s[(i, k)] = -head * w[i] / scale;
        }
    }
    Ok(SoulesBasis { s, w: w.to_vec() })
}

/// `S diag(d) S^T` for the Soules basis of `w`.
pub fn soules_cp(w: &[f64], d: &[f64]) -> Result<SymmetricMatrix> {
    let basis = soules_basis(w)?;
    if d.len() != w.len() {
        return Err(CpError::invalid("weights and spectrum differ in length"));
    }
    if d.iter().any(|&x| !(x >= 0.0)) {
        return Err(CpError::invalid("spectrum must be nonnegative"));
    }
    if d.windows(2).any(|p| p[0] < p[1]) {
        return Err(CpError::invalid("spectrum must be non-increasing"));
    }
    let scaled = DMatrix::from_fn(w.len(), w.len(), |i, j| basis.s[(i, j)] * d[j]);
    let a = &scaled * basis.s.transpose();
    let sym = (&a + a.transpose()) * 0.5;
    SymmetricMatrix::new(sym.map(|x| if x < 0.0 && x > -1e-12 { 0.0 } else { x }), 1e-12)
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// signs of `R`'s diagonal divided out).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    if d == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn random_unit<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DnStyle {
    /// Gram matrix of vectors in a cap of half-angle pi/4 around a random axis.
    RotatedNonneg,
    /// `G^T G` with `G` uniform on `[0, 1)`.
    GramNonneg,
    /// Soules construction with a random decreasing spectrum.
    Soules,
}

impl FromStr for DnStyle {
    type Err = CpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "_").as_str() {
            "ROTATED_NONNEG" | "ROTATED" => Ok(DnStyle::RotatedNonneg),
            "GRAM_NONNEG" | "GRAM" => Ok(DnStyle::GramNonneg),
            "SOULES" => Ok(DnStyle::Soules),
            _ => Err(CpError::invalid(format!("unknown generator style `{s}`"))),
        }
    }
}

fn draw_dn(n: usize, r: usize, style: DnStyle, rng: &mut ChaCha8Rng) -> Result<SymmetricMatrix> {
    match style {
        DnStyle::GramNonneg => {
            let g = DMatrix::from_fn(r, n, |_, _| rng.random::<f64>());
            Ok(SymmetricMatrix::gram(&g))
        }
        DnStyle::RotatedNonneg => {
            let axis = random_unit(r, rng);
            let mut v = DMatrix::zeros(r, n);
            for j in 0..n {
                let mut t = random_unit(r, rng);
                let along: f64 = t.iter().zip(&axis).map(|(a, b)| a * b).sum();
                for (ti, ai) in t.iter_mut().zip(&axis) {
                    *ti -= along * ai;
                }
                let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                let angle = rng.random_range(0.0..std::f64::consts::FRAC_PI_4);
                let length = rng.random_range(0.5..2.0);
                for i in 0..r {
                    let side = if tn > 1e-12 { t[i] / tn } else { 0.0 };
                    v[(i, j)] = length * (angle.cos() * axis[i] + angle.sin() * side);
                }
            }
            let a = SymmetricMatrix::gram(&v);
            let clamped = a.as_matrix().map(|x| x.max(0.0));
            SymmetricMatrix::new(clamped, 0.0)
        }
        DnStyle::Soules => {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let mut d: Vec<f64> = (0..r).map(|_| rng.random_range(0.1..3.0)).collect();
            d.sort_by(|a, b| b.total_cmp(a));
            d.resize(n, 0.0);
            soules_cp(&w, &d)
        }
    }
}

/// Random doubly nonnegative matrix of order `n` and rank `r`.
///
/// Draws are repeated (from the same stream) until the rank comes out as `r`.
pub fn random_dn(n: usize, r: usize, seed: u64, style: DnStyle) -> Result<SymmetricMatrix> {
    if r == 0 || r > n {
        return Err(CpError::invalid(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let a = draw_dn(n, r, style, &mut rng)?;
        let pr = psd_rank(&a, &tol)?;
        if pr.is_psd && pr.rank == r && a.is_nonnegative(0.0) {
            return Ok(a);
        }
    }
    Err(CpError::Computation(format!(
        "could not draw a rank {r} instance of order {n}"
    )))
}

/// Random diagonally dominant nonnegative matrix with small integer
/// entries. About a third of the rows are dominant with equality.
pub fn random_diagonally_dominant(n: usize, seed: u64) -> SymmetricMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(0.5) {
                let v = rng.random_range(1..=5) as f64;
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        let extra = if rng.random_bool(1.0 / 3.0) {
            0.0
        } else {
            rng.random_range(1..=4) as f64
        };
        a[(i, i)] = off + extra;
    }
    SymmetricMatrix::new(a, 0.0).expect("constructed symmetric")
}
