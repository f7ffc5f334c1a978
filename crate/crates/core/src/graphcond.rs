//! Conditions read off the zero pattern of `A`.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::matcore::{classify_dn, comparison_matrix, psd_rank, DnVerdict, SymmetricMatrix, Tolerances};
use crate::srfactor::{CpCertificate, Method};

/// Associated graph: an edge for every off-diagonal entry above
/// `eps_nonneg * max|a_ij|` in absolute value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixGraph {
    pub n: usize,
    /// Pairs `(i, j)` with `i < j`, sorted.
    pub edges: Vec<(usize, usize)>,
}

impl MatrixGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut e: Vec<(usize, usize)> = edges
            .iter()
            .filter(|(i, j)| i != j)
            .map(|&(i, j)| (i.min(j), i.max(j)))
            .collect();
        e.sort_unstable();
        e.dedup();
        MatrixGraph { n, edges: e }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
        m
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(i, j) in &self.edges {
            d[i] += 1;
            d[j] += 1;
        }
        d
    }
}

pub fn graph_of(a: &SymmetricMatrix, tol: &Tolerances) -> MatrixGraph {
    let n = a.order();
    let cut = tol.eps_nonneg * a.max_abs();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if a.get(i, j).abs() > cut {
                edges.push((i, j));
            }
        }
    }
    MatrixGraph { n, edges }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphClass {
    pub is_cycle: bool,
    pub is_triangle_free: bool,
    pub is_tree: bool,
    pub is_connected: bool,
}

pub fn classify_graph(g: &MatrixGraph) -> GraphClass {
    let n = g.n;
    let mut neighbors = vec![Vec::new(); n];
    for &(i, j) in &g.edges {
        neighbors[i].push(j);
        neighbors[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    if n > 0 {
        seen[0] = true;
        stack.push(0);
    }
    while let Some(v) = stack.pop() {
        for &w in &neighbors[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    let is_connected = seen.iter().all(|&s| s);
    let adj = g.adjacency();
    let is_triangle_free = (&adj * &adj * &adj).trace() == 0.0;
    GraphClass {
        is_cycle: n >= 3 && is_connected && g.degrees().iter().all(|&d| d == 2),
        is_triangle_free,
        is_tree: n > 0 && is_connected && g.edge_count() + 1 == n,
        is_connected,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleOutcome {
    Passes,
    Fails,
    NotApplicable,
}

impl CycleOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            CycleOutcome::Passes => "PASSES",
            CycleOutcome::Fails => "FAILS",
            CycleOutcome::NotApplicable => "NOT_APPLICABLE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleCheck {
    pub outcome: CycleOutcome,
    /// Sum of the entries above the diagonal.
    pub upper_sum: f64,
    pub trace: f64,
    /// `n` whenever the graph is a cycle on at least four vertices.
    pub cprk_lower_bound: Option<usize>,
}

/// Necessary condition for a matrix whose graph is a cycle of length
/// `n >= 4`: `2 * sum_{i<j} a_ij <= trace`, and then cp-rank is at least `n`.
pub fn cycle_necessary(a: &SymmetricMatrix, tol: &Tolerances) -> CycleCheck {
    let n = a.order();
    let g = graph_of(a, tol);
    let mut upper_sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            upper_sum += a.get(i, j);
        }
    }
    let trace = a.trace();
    if n < 4 || !classify_graph(&g).is_cycle {
        return CycleCheck {
            outcome: CycleOutcome::NotApplicable,
            upper_sum,
            trace,
            cprk_lower_bound: None,
        };
    }
    let slack = 1e-12 * trace.abs();
    let outcome = if 2.0 * upper_sum > trace + slack {
        CycleOutcome::Fails
    } else {
        CycleOutcome::Passes
    };
    CycleCheck {
        outcome,
        upper_sum,
        trace,
        cprk_lower_bound: Some(n),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TriangleFreeOutcome {
    Cp { cp_rank: usize },
    NotCp,
    NotApplicable(String),
}

impl TriangleFreeOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            TriangleFreeOutcome::Cp { .. } => "CP",
            TriangleFreeOutcome::NotCp => "NOT_CP",
            TriangleFreeOutcome::NotApplicable(_) => "NOT_APPLICABLE",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleFreeCheck {
    pub outcome: TriangleFreeOutcome,
    pub edge_count: usize,
    pub rank: Option<usize>,
    /// Smallest eigenvalue of the comparison matrix, when computed.
    pub comparison_min_eigenvalue: Option<f64>,
}

/// For a DN matrix with triangle-free graph: CP iff the comparison matrix
/// is PSD, and then cp-rank = max(rank, edges).
pub fn triangle_free_criterion(a: &SymmetricMatrix, tol: &Tolerances) -> Result<TriangleFreeCheck> {
    let g = graph_of(a, tol);
    let edge_count = g.edge_count();
    let rank = match classify_dn(a, tol)? {
        DnVerdict::Dn { rank } => rank,
        other => {
            return Ok(TriangleFreeCheck {
                outcome: TriangleFreeOutcome::NotApplicable(format!("input is {}", other.label())),
                edge_count,
                rank: None,
                comparison_min_eigenvalue: None,
            })
        }
    };
    if !classify_graph(&g).is_triangle_free {
        return Ok(TriangleFreeCheck {
            outcome: TriangleFreeOutcome::NotApplicable("graph contains a triangle".into()),
            edge_count,
            rank: Some(rank),
            comparison_min_eigenvalue: None,
        });
    }
    let m = comparison_matrix(&clamp_small_negatives(a, tol.eps_nonneg)?)?;
    let pr = psd_rank(&m, tol)?;
    let outcome = if pr.is_psd {
        TriangleFreeOutcome::Cp {
            cp_rank: rank.max(edge_count),
        }
    } else {
        TriangleFreeOutcome::NotCp
    };
    Ok(TriangleFreeCheck {
        outcome,
        edge_count,
        rank: Some(rank),
        comparison_min_eigenvalue: Some(pr.min_eigenvalue),
    })
}

#[derive(Clone, Debug)]
pub struct KaykobadResult {
    pub certificate: CpCertificate,
    pub edge_rows: usize,
    pub strict_rows: usize,
}

/// Nonnegative factor of a diagonally dominant nonnegative matrix: one row
/// `sqrt(a_ij) (e_i + e_j)` per edge and `sqrt(slack_i) e_i` per strictly
/// dominant row. `None` when `A` is not diagonally dominant.
pub fn kaykobad_factor(a: &SymmetricMatrix, tol: &Tolerances) -> Result<Option<KaykobadResult>> {
    let n = a.order();
    if !a.is_nonnegative(tol.eps_nonneg) {
        return Ok(None);
    }
    let g = graph_of(a, tol);
    let mut margins = Vec::with_capacity(n);
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a.get(i, j).max(0.0)).sum();
        let scale = a.get(i, i).abs().max(off).max(f64::MIN_POSITIVE);
        let margin = a.get(i, i) - off;
        let slack = tol.eps_nonneg * scale;
        if margin < -slack {
            return Ok(None);
        }
        margins.push((margin, slack));
    }
    let strict: Vec<usize> = (0..n).filter(|&i| margins[i].0 > margins[i].1).collect();
    let rows = g.edge_count() + strict.len();
    let mut c = DMatrix::zeros(rows, n);
    for (k, &(i, j)) in g.edges.iter().enumerate() {
        let s = a.get(i, j).sqrt();
        c[(k, i)] = s;
        c[(k, j)] = s;
    }
    for (k, &i) in strict.iter().enumerate() {
        c[(g.edge_count() + k, i)] = margins[i].0.sqrt();
    }
    let certificate = CpCertificate::verified(a, c, Method::Kaykobad, tol)?;
    Ok(Some(KaykobadResult {
        certificate,
        edge_rows: g.edge_count(),
        strict_rows: strict.len(),
    }))
}

/// Copy with negatives inside the slack set to zero.
fn clamp_small_negatives(a: &SymmetricMatrix, slack: f64) -> Result<SymmetricMatrix> {
    let data = a.as_matrix().map(|x| if x < 0.0 && x >= -slack { 0.0 } else { x });
    SymmetricMatrix::new(data, f64::INFINITY)
}
