//! The decision cascade.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::cones::{decide_cp_n3, extreme_rays, few_rays_factor, Rank3Decision};
use crate::error::Result;
use crate::graphcond::{
    classify_graph, cycle_necessary, graph_of, kaykobad_factor, triangle_free_criterion, CycleOutcome,
    TriangleFreeOutcome,
};
use crate::matcore::{psd_rank_from_eigen, sym_eigen, symmetry_defect, DnVerdict, SymmetricMatrix, Tolerances};
use crate::nnq::{find_nnq_witness, nnq_factor, WitnessSearch, DEFAULT_MAX_SUBSETS};
use crate::rotate::{
    orthant_factor, rank2_factor, rowsum_condition, rowsum_factor, SearchBudget, MAX_GUARANTEED_DIM,
};
use crate::srfactor::{sr_factor, verify_certificate, CpCertificate, Method};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyzeConfig {
    pub tol: Tolerances,
    pub seed: u64,
    pub budget: SearchBudget,
    /// Attempt rotations for rank 5 and above.
    pub heuristic: bool,
    pub max_subsets: usize,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            tol: Tolerances::default(),
            seed: 0,
            budget: SearchBudget::default(),
            heuristic: false,
            max_subsets: DEFAULT_MAX_SUBSETS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    NotDn,
    NotCp,
    /// CP membership undecided or true, but cp-rank exceeds rank.
    NotInCpNR,
    CpRankEqRank,
    CpWithBound { lower: usize, upper: usize },
    Undecided,
}

impl Verdict {
    pub fn label(&self) -> String {
        match self {
            Verdict::NotDn => "NOT_DN".into(),
            Verdict::NotCp => "NOT_CP".into(),
            Verdict::NotInCpNR => "NOT_IN_CP_N_R".into(),
            Verdict::CpRankEqRank => "CP_RANK_EQ_RANK".into(),
            Verdict::CpWithBound { lower, upper } => format!("CP_WITH_BOUND({lower},{upper})"),
            Verdict::Undecided => "UNDECIDED".into(),
        }
    }

    pub fn is_definitive(&self) -> bool {
        !matches!(self, Verdict::Undecided)
    }
}

/// A value attached to a step in the log.
#[derive(Clone, Debug, PartialEq)]
pub enum Detail {
    Count(usize),
    Real(f64),
    Reals(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
    Indices(Vec<usize>),
    Text(String),
    Flag(bool),
}

impl Detail {
    pub fn matrix(m: &DMatrix<f64>) -> Detail {
        Detail::Matrix(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub name: &'static str,
    pub outcome: String,
    pub details: Vec<(&'static str, Detail)>,
    pub elapsed: Duration,
}

impl Step {
    pub fn detail(&self, key: &str) -> Option<&Detail> {
        self.details.iter().find(|(k, _)| *k == key).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub order: usize,
    pub symmetry_defect: f64,
    pub dn: DnVerdict,
    /// Numerical rank of the PSD part, reported even when not DN.
    pub rank: usize,
    pub steps: Vec<Step>,
    pub verdict: Verdict,
    /// The smallest verified certificate found, on the full input.
    pub certificate: Option<CpCertificate>,
    pub cp_rank_lower: Option<usize>,
    pub cp_rank_upper: Option<usize>,
    pub seed: u64,
}

impl AnalysisReport {
    pub fn step(&self, name: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.name == name)
    }
}

struct Cascade<'a> {
    full: &'a SymmetricMatrix,
    kept: Vec<usize>,
    tol: Tolerances,
    rank: usize,
    steps: Vec<Step>,
    definitive: Option<Verdict>,
    certificate: Option<CpCertificate>,
    lower: usize,
    upper: Option<usize>,
}

impl Cascade<'_> {
    fn log(&mut self, name: &'static str, started: Instant, outcome: impl Into<String>, details: Vec<(&'static str, Detail)>) {
        self.steps.push(Step {
            name,
            outcome: outcome.into(),
            details,
            elapsed: started.elapsed(),
        });
    }

    fn decide(&mut self, v: Verdict) {
        if self.definitive.is_none() {
            self.definitive = Some(v);
        }
    }

    fn tighten_upper(&mut self, k: usize) {
        self.upper = Some(self.upper.map_or(k, |u| u.min(k)));
    }

    /// Lifts a certificate for the deflated matrix back to the input and
    /// keeps it when it verifies. Returns the verified row count.
    fn offer(&mut self, cert: &CpCertificate) -> Option<usize> {
        let lifted = cert.reinflate(&self.kept, self.full.order(), self.full, &self.tol);
        if !verify_certificate(self.full, &lifted, &self.tol).pass {
            return None;
        }
        let rows = lifted.rows();
        self.tighten_upper(rows);
        if rows == self.rank {
            self.decide(Verdict::CpRankEqRank);
        }
        if self.certificate.as_ref().is_none_or(|c| rows < c.rows()) {
            self.certificate = Some(lifted);
        }
        Some(rows)
    }

    fn map_indices(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.kept[i] + 1).collect()
    }

    fn has_rank_certificate(&self) -> bool {
        self.certificate.as_ref().is_some_and(|c| c.rows() == self.rank)
    }
}

fn certificate_details(cert: &CpCertificate, rows: Option<usize>) -> Vec<(&'static str, Detail)> {
    vec![
        ("method", Detail::Text(cert.method.tag().into())),
        ("rows", Detail::Count(rows.unwrap_or(cert.rows()))),
        ("residual", Detail::Real(cert.residual)),
        ("verified", Detail::Flag(rows.is_some())),
    ]
}

fn certified_outcome(rows: Option<usize>) -> &'static str {
    if rows.is_some() {
        "CERTIFIED"
    } else {
        "REJECTED"
    }
}

/// Runs every applicable step in order and assembles the verdict.
///
/// The first definitive finding decides the verdict; later steps still
/// run and are logged.
pub fn analyze(a: &SymmetricMatrix, config: &AnalyzeConfig) -> Result<AnalysisReport> {
    let tol = config.tol;
    tol.validate()?;
    let n = a.order();

    let started = Instant::now();
    let eig = sym_eigen(a)?;
    let pr = psd_rank_from_eigen(&eig, &tol);
    let nonneg = a.is_nonnegative(tol.eps_nonneg);
    let dn = if !nonneg {
        DnVerdict::NotNonnegative
    } else if !pr.is_psd {
        DnVerdict::NotPsd
    } else {
        DnVerdict::Dn { rank: pr.rank }
    };
    let mut report = AnalysisReport {
        order: n,
        symmetry_defect: symmetry_defect(a.as_matrix()),
        dn,
        rank: pr.rank,
        steps: Vec::new(),
        verdict: Verdict::NotDn,
        certificate: None,
        cp_rank_lower: None,
        cp_rank_upper: None,
        seed: config.seed,
    };
    report.steps.push(Step {
        name: "classify_dn",
        outcome: dn.label().into(),
        details: vec![
            ("rank", Detail::Count(pr.rank)),
            ("min_eigenvalue", Detail::Real(pr.min_eigenvalue)),
            ("max_abs_eigenvalue", Detail::Real(pr.max_abs_eigenvalue)),
            ("min_entry", Detail::Real(a.min_entry())),
            ("eigenvalues", Detail::Reals(eig.eigenvalues.iter().copied().collect())),
        ],
        elapsed: started.elapsed(),
    });
    let DnVerdict::Dn { rank } = dn else {
        return Ok(report);
    };

    let zero_cut = tol.eps_nonneg * a.max_abs();
    let kept: Vec<usize> = (0..n).filter(|&i| a.get(i, i) > zero_cut).collect();
    let mut cx = Cascade {
        full: a,
        kept,
        tol,
        rank,
        steps: std::mem::take(&mut report.steps),
        definitive: None,
        certificate: None,
        lower: rank,
        upper: None,
    };

    if cx.kept.is_empty() || rank == 0 {
        let t = Instant::now();
        let cert = CpCertificate::new(a, DMatrix::zeros(0, n), Method::Trivial, &tol);
        let rows = cx.offer(&cert);
        cx.log("trivial_rank", t, certified_outcome(rows), certificate_details(&cert, rows));
        return Ok(finish(report, cx));
    }
    let deflated = a.principal_submatrix(&cx.kept);
    let nd = deflated.order();
    let factor = sr_factor(&deflated, &tol)?;

    // Rank at most one.
    let t = Instant::now();
    if rank <= 1 {
        let mut b = factor.matrix().clone();
        if b.sum() < 0.0 {
            b.neg_mut();
        }
        let cert = CpCertificate::new(&deflated, b, Method::Trivial, &tol);
        let rows = cx.offer(&cert);
        cx.log("trivial_rank", t, certified_outcome(rows), certificate_details(&cert, rows));
    } else {
        cx.log("trivial_rank", t, "NOT_APPLICABLE", vec![("rank", Detail::Count(rank))]);
    }

    // Rank two.
    let t = Instant::now();
    if rank == 2 {
        match rank2_factor(&deflated, &tol) {
            Ok(cert) => {
                let rows = cx.offer(&cert);
                cx.log("rank2_bisector", t, certified_outcome(rows), certificate_details(&cert, rows));
            }
            Err(e) => cx.log("rank2_bisector", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
        }
    } else {
        cx.log("rank2_bisector", t, "NOT_APPLICABLE", vec![("rank", Detail::Count(rank))]);
    }

    // Small full-rank orders.
    let t = Instant::now();
    if rank >= 3 && nd <= MAX_GUARANTEED_DIM && rank == nd {
        match orthant_factor(&deflated, &factor, config.budget, config.seed, &tol, false) {
            Ok(Some(cert)) => {
                let rows = cx.offer(&cert);
                cx.log("orthant_rotation", t, certified_outcome(rows), certificate_details(&cert, rows));
            }
            Ok(None) => cx.log(
                "orthant_rotation",
                t,
                "NOT_FOUND",
                vec![("restarts", Detail::Count(config.budget.restarts))],
            ),
            Err(e) => cx.log("orthant_rotation", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
        }
    } else {
        cx.log("orthant_rotation", t, "NOT_APPLICABLE", vec![("order", Detail::Count(nd))]);
    }

    // Row-sum condition.
    let t = Instant::now();
    let check = rowsum_condition(&deflated, rank);
    let mut details = vec![
        ("row_sums", Detail::Reals(check.data.row_sums.clone())),
        ("total", Detail::Real(check.data.total)),
    ];
    if let Some(i) = check.failing_row {
        details.push(("failing_row", Detail::Count(cx.kept[i] + 1)));
    }
    if check.holds {
        match rowsum_factor(&deflated, &tol) {
            Ok(cert) => {
                let rows = cx.offer(&cert);
                details.extend(certificate_details(&cert, rows));
                cx.log("rowsum", t, certified_outcome(rows), details);
            }
            Err(e) => {
                details.push(("error", Detail::Text(e.to_string())));
                cx.log("rowsum", t, "FAILED", details);
            }
        }
    } else {
        cx.log("rowsum", t, "CONDITION_FAILS", details);
    }

    // nnq search.
    let t = Instant::now();
    if rank <= MAX_GUARANTEED_DIM {
        let search = find_nnq_witness(&factor, &tol, config.max_subsets);
        match &search {
            WitnessSearch::Found(w) => {
                let mut details = vec![
                    ("indices", Detail::Indices(cx.map_indices(&w.indices))),
                    ("detval", Detail::Real(w.detval)),
                    ("p", Detail::matrix(&w.p)),
                ];
                match nnq_factor(&deflated, w, &tol, config.seed, config.budget) {
                    Ok(cert) => {
                        let rows = cx.offer(&cert);
                        details.extend(certificate_details(&cert, rows));
                        cx.log("nnq", t, certified_outcome(rows), details);
                    }
                    Err(e) => {
                        details.push(("error", Detail::Text(e.to_string())));
                        cx.log("nnq", t, "FAILED", details);
                    }
                }
            }
            other => cx.log("nnq", t, other.label(), vec![]),
        }
    } else {
        cx.log("nnq", t, "NOT_APPLICABLE", vec![("rank", Detail::Count(rank))]);
    }

    // Cone analysis.
    let t = Instant::now();
    match extreme_rays(&deflated, &tol) {
        Ok(cone) => {
            let mut details = vec![
                ("m", Detail::Count(cone.m)),
                ("extreme_indices", Detail::Indices(cx.map_indices(&cone.extreme_indices))),
                ("residual", Detail::Real(cone.residual)),
            ];
            if cone.m <= MAX_GUARANTEED_DIM {
                match few_rays_factor(&deflated, &cone, &tol, config.seed, config.budget) {
                    Ok(cert) => {
                        let rows = cx.offer(&cert);
                        details.extend(certificate_details(&cert, rows));
                        cx.log("extreme_rays", t, certified_outcome(rows), details);
                    }
                    Err(e) => {
                        details.push(("error", Detail::Text(e.to_string())));
                        cx.log("extreme_rays", t, "FAILED", details);
                    }
                }
            } else {
                cx.log("extreme_rays", t, "TOO_MANY_RAYS", details);
            }

            let t = Instant::now();
            if rank == 3 && cone.m == 3 {
                match decide_cp_n3(&deflated, &tol, config.seed, config.budget) {
                    Ok(Rank3Decision::InCpN3 { certificate, witness }) => {
                        let rows = cx.offer(&certificate);
                        let mut details = vec![("indices", Detail::Indices(cx.map_indices(&witness.indices)))];
                        details.extend(certificate_details(&certificate, rows));
                        cx.log("rank3_extreme", t, "IN_CP_N3", details);
                    }
                    Ok(Rank3Decision::NotInCpN3) => {
                        cx.decide(Verdict::NotInCpNR);
                        cx.lower = cx.lower.max(rank + 1);
                        cx.log("rank3_extreme", t, "NOT_IN_CP_N3", vec![]);
                    }
                    Ok(Rank3Decision::NotApplicable(reason)) => {
                        cx.log("rank3_extreme", t, "NOT_APPLICABLE", vec![("reason", Detail::Text(reason))])
                    }
                    Err(e) => cx.log("rank3_extreme", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
                }
            } else {
                cx.log("rank3_extreme", t, "NOT_APPLICABLE", vec![("m", Detail::Count(cone.m))]);
            }
        }
        Err(e) => {
            cx.log("extreme_rays", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]);
        }
    }

    // Graph conditions on the full input.
    let t = Instant::now();
    let graph = graph_of(a, &tol);
    let class = classify_graph(&graph);
    cx.log(
        "graph",
        t,
        "CLASSIFIED",
        vec![
            ("edges", Detail::Count(graph.edge_count())),
            ("is_cycle", Detail::Flag(class.is_cycle)),
            ("is_triangle_free", Detail::Flag(class.is_triangle_free)),
            ("is_tree", Detail::Flag(class.is_tree)),
            ("is_connected", Detail::Flag(class.is_connected)),
        ],
    );

    let t = Instant::now();
    let cycle = cycle_necessary(a, &tol);
    let mut details = vec![
        ("offdiagonal_sum", Detail::Real(2.0 * cycle.upper_sum)),
        ("trace", Detail::Real(cycle.trace)),
    ];
    if let Some(b) = cycle.cprk_lower_bound {
        details.push(("cprk_lower_bound", Detail::Count(b)));
    }
    match cycle.outcome {
        CycleOutcome::Fails => cx.decide(Verdict::NotCp),
        CycleOutcome::Passes => {
            let bound = cycle.cprk_lower_bound.unwrap_or(n);
            cx.lower = cx.lower.max(bound);
            if bound > rank {
                cx.decide(Verdict::NotInCpNR);
            }
        }
        CycleOutcome::NotApplicable => {}
    }
    cx.log("cycle_condition", t, cycle.outcome.label(), details);

    let t = Instant::now();
    match triangle_free_criterion(a, &tol) {
        Ok(tf) => {
            let mut details = vec![("edges", Detail::Count(tf.edge_count))];
            if let Some(m) = tf.comparison_min_eigenvalue {
                details.push(("comparison_min_eigenvalue", Detail::Real(m)));
            }
            match &tf.outcome {
                TriangleFreeOutcome::Cp { cp_rank } => {
                    details.push(("cp_rank", Detail::Count(*cp_rank)));
                    cx.lower = cx.lower.max(*cp_rank);
                    cx.tighten_upper(*cp_rank);
                    if *cp_rank == rank && cx.has_rank_certificate() {
                        cx.decide(Verdict::CpRankEqRank);
                    } else {
                        cx.decide(Verdict::CpWithBound {
                            lower: *cp_rank,
                            upper: *cp_rank,
                        });
                    }
                }
                TriangleFreeOutcome::NotCp => cx.decide(Verdict::NotCp),
                TriangleFreeOutcome::NotApplicable(reason) => details.push(("reason", Detail::Text(reason.clone()))),
            }
            cx.log("triangle_free", t, tf.outcome.label(), details);
        }
        Err(e) => cx.log("triangle_free", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
    }

    let t = Instant::now();
    match kaykobad_factor(a, &tol) {
        Ok(Some(k)) => {
            let rows = verify_certificate(a, &k.certificate, &tol).pass.then_some(k.certificate.rows());
            if let Some(r) = rows {
                cx.tighten_upper(r);
                if r == rank {
                    cx.decide(Verdict::CpRankEqRank);
                }
                if cx.certificate.as_ref().is_none_or(|c| r < c.rows()) {
                    cx.certificate = Some(k.certificate.clone());
                }
            }
            let mut details = certificate_details(&k.certificate, rows);
            details.push(("edge_rows", Detail::Count(k.edge_rows)));
            details.push(("strict_rows", Detail::Count(k.strict_rows)));
            cx.log("kaykobad", t, certified_outcome(rows), details);
        }
        Ok(None) => cx.log("kaykobad", t, "NOT_APPLICABLE", vec![]),
        Err(e) => cx.log("kaykobad", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
    }

    // Optional search beyond the guaranteed dimensions.
    let t = Instant::now();
    if config.heuristic && rank > MAX_GUARANTEED_DIM && !cx.has_rank_certificate() && cx.definitive.is_none() {
        match orthant_factor(&deflated, &factor, config.budget, config.seed, &tol, true) {
            Ok(Some(cert)) => {
                let rows = cx.offer(&cert);
                cx.log("heuristic_rotation", t, certified_outcome(rows), certificate_details(&cert, rows));
            }
            Ok(None) => cx.log("heuristic_rotation", t, "NOT_FOUND", vec![]),
            Err(e) => cx.log("heuristic_rotation", t, "FAILED", vec![("error", Detail::Text(e.to_string()))]),
        }
    } else {
        let outcome = if config.heuristic { "NOT_APPLICABLE" } else { "DISABLED" };
        cx.log("heuristic_rotation", t, outcome, vec![]);
    }

    Ok(finish(report, cx))
}

fn finish(mut report: AnalysisReport, cx: Cascade<'_>) -> AnalysisReport {
    let verdict = match cx.definitive {
        Some(v) => v,
        None => match cx.upper {
            Some(u) if u == cx.rank && cx.lower == cx.rank => Verdict::CpRankEqRank,
            Some(u) => Verdict::CpWithBound {
                lower: cx.lower,
                upper: u,
            },
            None => Verdict::Undecided,
        },
    };
    report.steps = cx.steps;
    report.verdict = verdict;
    report.certificate = cx.certificate;
    report.cp_rank_lower = Some(cx.lower);
    report.cp_rank_upper = cx.upper;
    report
}
