mod common;

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::{gaussian, rng, sample_in_cone};
use cprank::cones::{extreme_rays, extreme_rays_of_columns};
use cprank::fixtures::{
    ex3_7_printed_b, ex3_7_printed_c, ex3_9_printed_c, ex3_9_printed_p, paper_matrix, random_diagonally_dominant,
    random_dn, random_orthogonal, DnStyle, PaperExample,
};
use cprank::graphcond::{cycle_necessary, kaykobad_factor, triangle_free_criterion, CycleOutcome, TriangleFreeOutcome};
use cprank::matcore::{classify_dn, comparison_matrix, psd_rank, DnVerdict};
use cprank::nnq::{find_nnq_witness, gram_coordinates, nnq_factor, nnq_invariance_check, WitnessSearch, DEFAULT_MAX_SUBSETS};
use cprank::pipeline::{analyze, AnalysisReport, AnalyzeConfig, Detail, Verdict};
use cprank::report::to_json;
use cprank::rotate::{
    boundary_witness, e_cone_threshold, householder_align, in_e_cone, orthant_factor, rank2_factor, SearchBudget,
};
use cprank::srfactor::{connecting_orthogonal, relative_gram_residual, sr_factor, verify_certificate, Method, SrFactor};
use cprank::SymmetricMatrix;

/// Writes the verdict line past the test harness capture, then asserts.
fn check(criterion: u32, pass: bool, what: &str) {
    let line = format!(
        "criterion {criterion:>2} [{}] {what}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {criterion} failed: {what}");
}

fn run(id: PaperExample) -> AnalysisReport {
    let config = AnalyzeConfig {
        tol: id.tolerances(),
        ..AnalyzeConfig::default()
    };
    analyze(&paper_matrix(id), &config).unwrap()
}

fn reals(d: Option<&Detail>) -> Vec<f64> {
    match d {
        Some(Detail::Reals(v)) => v.clone(),
        _ => Vec::new(),
    }
}

#[test]
fn criterion_01_rowsum_four_by_four() {
    let t = Instant::now();
    let r = run(PaperExample::Ex2_7);
    let elapsed = t.elapsed().as_secs_f64();
    let cert = r.certificate.as_ref().unwrap();
    let a = paper_matrix(PaperExample::Ex2_7);
    let sums = reals(r.step("rowsum").and_then(|s| s.detail("row_sums")));
    let pass = r.verdict == Verdict::CpRankEqRank
        && cert.rows() == 3
        && cert.method == Method::Rowsum
        && r.step("rowsum").unwrap().outcome == "CERTIFIED"
        && verify_certificate(&a, cert, &PaperExample::Ex2_7.tolerances()).pass
        && relative_gram_residual(&a, &cert.factor) <= 1e-8
        && sums == vec![220.0, 156.0, 172.0, 201.0];
    check(
        1,
        pass,
        &format!(
            "verdict {}, rows {}, method {}, residual {:.2e} (<= 1e-8), row sums {:?}, {:.3} s",
            r.verdict.label(),
            cert.rows(),
            cert.method.tag(),
            cert.residual,
            sums,
            elapsed
        ),
    );
}

#[test]
fn criterion_02_rowsum_five_by_five() {
    let t = Instant::now();
    let r = run(PaperExample::Ex2_8);
    let elapsed = t.elapsed().as_secs_f64();
    let cert = r.certificate.as_ref().unwrap();
    let a = paper_matrix(PaperExample::Ex2_8);
    let residual = relative_gram_residual(&a, &cert.factor);
    let pass = r.verdict == Verdict::CpRankEqRank
        && r.order == 5
        && cert.rows() == 3
        && cert.factor.min() >= 0.0
        && residual <= 1e-8;
    check(
        2,
        pass,
        &format!(
            "verdict {}, 5x5, rows {}, method {}, residual {:.2e} (<= 1e-8), {:.3} s",
            r.verdict.label(),
            cert.rows(),
            cert.method.tag(),
            residual,
            elapsed
        ),
    );
}

#[test]
fn criterion_03_nnq_printed_precision() {
    let t = Instant::now();
    let id = PaperExample::Ex3_9;
    let tol = id.tolerances();
    let a = paper_matrix(id);
    let b = sr_factor(&a, &tol).unwrap();
    let search = find_nnq_witness(&b, &tol, DEFAULT_MAX_SUBSETS);
    let w = search.witness().expect("witness");
    let witness_ok = w.indices == vec![0, 1, 2];

    // The identity holds for the matrix that B factors exactly.
    let projected = b.gram();
    let gram_side = gram_coordinates(&projected, &w.indices).unwrap();
    let identity = (&w.p - &gram_side).amax();
    // Against the four-decimal input itself, for the record.
    let raw_gap = (&w.p - gram_coordinates(&a, &w.indices).unwrap()).amax();

    let printed_gap = (&w.p - ex3_9_printed_p()).amax();
    let cert = nnq_factor(&a, w, &tol, 0, SearchBudget::default()).unwrap();
    let residual = relative_gram_residual(&a, &cert.factor);
    let report = run(id);
    let report_residual = report
        .certificate
        .as_ref()
        .map_or(f64::INFINITY, |c| relative_gram_residual(&a, &c.factor));
    let printed_c_residual = relative_gram_residual(&a, &ex3_9_printed_c());
    // Eckart-Young floor for any rank 3 factor of the printed matrix.
    let eig = cprank::matcore::sym_eigen(&a).unwrap();
    let tail: f64 = eig.eigenvalues.iter().skip(3).map(|l| l * l).sum::<f64>().sqrt();
    let floor = tail / a.frobenius_norm();
    let elapsed = t.elapsed().as_secs_f64();

    let pass = witness_ok
        && identity <= 1e-8
        && printed_gap <= 0.15
        && cert.rows() == 3
        && cert.factor.min() >= 0.0
        && residual <= 1e-5
        && report_residual <= 1e-5;
    check(
        3,
        pass,
        &format!(
            "witness {:?}, identity gap {:.2e} (<= 1e-8; raw input gap {:.2e}), printed P gap {:.4} (<= 0.15), \
             nnq certificate residual {:.3e} and report residual {:.3e} (<= 1e-5; rank 3 floor {:.3e}, printed C {:.3e}), {:.3} s",
            w.indices_one_based(),
            identity,
            raw_gap,
            printed_gap,
            residual,
            report_residual,
            floor,
            printed_c_residual,
            elapsed
        ),
    );
}

#[test]
fn criterion_04_cycle_bracket() {
    let t = Instant::now();
    let id = PaperExample::Ex1_2;
    let tol = id.tolerances();
    let a = paper_matrix(id);
    let dn = classify_dn(&a, &tol).unwrap();
    let cycle = cycle_necessary(&a, &tol);
    let r = run(id);
    let kk = kaykobad_factor(&a, &tol).unwrap().unwrap();
    let tf = triangle_free_criterion(&a, &tol).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    let pass = dn == DnVerdict::Dn { rank: 3 }
        && cycle.outcome == CycleOutcome::Passes
        && 2.0 * cycle.upper_sum == 8.0
        && cycle.trace == 8.0
        && cycle.cprk_lower_bound == Some(4)
        && kk.certificate.rows() == 4
        && tf.outcome == (TriangleFreeOutcome::Cp { cp_rank: 4 })
        && r.cp_rank_lower == Some(4)
        && r.cp_rank_upper == Some(4)
        && r.verdict == Verdict::NotInCpNR;
    check(
        4,
        pass,
        &format!(
            "{}, cycle {} with {} = {}, bracket [{:?}, {:?}], kaykobad rows {}, verdict {}, {:.3} s",
            dn.label(),
            cycle.outcome.label(),
            2.0 * cycle.upper_sum,
            cycle.trace,
            r.cp_rank_lower,
            r.cp_rank_upper,
            kk.certificate.rows(),
            r.verdict.label(),
            elapsed
        ),
    );
}

#[test]
fn criterion_05_triangle_free() {
    let t = Instant::now();
    let id = PaperExample::Ex3_3;
    let tol = id.tolerances();
    let a = paper_matrix(id);
    let det = a.as_matrix().clone().determinant();
    let m = comparison_matrix(&a).unwrap();
    let m_psd = psd_rank(&m, &tol).unwrap().is_psd;
    let tf = triangle_free_criterion(&a, &tol).unwrap();
    let r = run(id);
    let elapsed = t.elapsed().as_secs_f64();
    let pass = (det - 4.0).abs() <= 1e-9
        && m_psd
        && tf.outcome == (TriangleFreeOutcome::Cp { cp_rank: 6 })
        && tf.edge_count == 6
        && r.verdict == (Verdict::CpWithBound { lower: 6, upper: 6 })
        && r.dn == DnVerdict::Dn { rank: 5 }
        && r.cp_rank_lower.unwrap() > 5;
    check(
        5,
        pass,
        &format!(
            "det {det:.12}, M(A) psd {m_psd}, cp-rank {:?}, verdict {} (rank 5 < 6, so not in CP(5,5)), {:.3} s",
            tf.outcome,
            r.verdict.label(),
            elapsed
        ),
    );
}

#[test]
fn criterion_06_no_nnq_factor() {
    let t = Instant::now();
    let id = PaperExample::Ex3_7;
    let tol = id.tolerances();
    let a = paper_matrix(id);
    let c = ex3_7_printed_c();
    let exact = c.transpose() * &c == *a.as_matrix();
    let b = sr_factor(&a, &tol).unwrap();
    let search = find_nnq_witness(&b, &tol, DEFAULT_MAX_SUBSETS);
    let printed = find_nnq_witness(&SrFactor::from_matrix(ex3_7_printed_b()), &tol, DEFAULT_MAX_SUBSETS);
    let invariant = nnq_invariance_check(&a, &tol, 6).unwrap();
    let r = run(id);
    let elapsed = t.elapsed().as_secs_f64();
    let pass = exact
        && c.nrows() == 3
        && c.min() >= 0.0
        && search == WitnessSearch::None
        && printed == WitnessSearch::None
        && invariant
        && r.step("nnq").unwrap().outcome == "NONE";
    check(
        6,
        pass,
        &format!(
            "printed C exact {exact} (3 rows), nnq on eigen factor {}, on printed factor {}, invariance {invariant}, \
             pipeline verdict {}, {:.3} s",
            search.label(),
            printed.label(),
            r.verdict.label(),
            elapsed
        ),
    );
}

#[test]
fn criterion_07_e_cone() {
    let t = Instant::now();
    let mut worst = f64::INFINITY;
    let mut sampled = 0usize;
    let mut witnesses_ok = true;
    for r in 2..=8usize {
        let mut g = rng(700 + r as u64);
        let threshold = e_cone_threshold(r);
        let mut count = 0;
        while count < 10_000 {
            let z = sample_in_cone(r, threshold, &mut g);
            if !in_e_cone(&z).unwrap() {
                continue;
            }
            let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
            let min = z.iter().fold(f64::INFINITY, |m, &x| m.min(x / norm));
            worst = worst.min(min);
            count += 1;
        }
        sampled += count;
        let w = boundary_witness(r, 0.99 * threshold).unwrap();
        let q = cprank::rotate::EConeQuery::new(w.clone()).unwrap();
        witnesses_ok &= w.iter().any(|&x| x < 0.0) && q.cosine() >= 0.99 * threshold;
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        7,
        worst >= -1e-12 && witnesses_ok,
        &format!(
            "{sampled} in-cone samples, smallest normalized entry {worst:.3e} (>= -1e-12); \
             boundary witnesses negative for r = 2..8: {witnesses_ok}, {elapsed:.3} s"
        ),
    );
}

#[test]
fn criterion_08_householder() {
    let t = Instant::now();
    let mut orth = 0.0f64;
    let mut align = 0.0f64;
    for r in 2..=8usize {
        let mut g = rng(800 + r as u64);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..r).map(|_| g.random_range(-10.0..10.0)).collect();
            let plan = householder_align(&x).unwrap();
            let q = &plan.q;
            orth = orth.max((q.transpose() * q - DMatrix::<f64>::identity(r, r)).amax());
            let xv = DVector::from_vec(x.clone());
            let norm = xv.norm();
            let target = DVector::from_element(r, norm / (r as f64).sqrt());
            align = align.max((q * &xv - target).norm() / norm);
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        8,
        orth <= 1e-12 && align <= 1e-10,
        &format!("7000 vectors, max |Q^T Q - I| {orth:.2e} (<= 1e-12), max relative alignment error {align:.2e} (<= 1e-10), {elapsed:.3} s"),
    );
}

#[test]
fn criterion_09_connecting_orthogonal() {
    let t = Instant::now();
    let tol = cprank::Tolerances::default();
    let mut g = rng(9);
    let mut orth = 0.0f64;
    let mut recon = 0.0f64;
    for _ in 0..1000 {
        let n = g.random_range(1..=8usize);
        let r = g.random_range(1..=n);
        let b = gaussian(r, n, &mut g);
        let q0 = random_orthogonal(r, &mut g);
        let c = &q0 * &b;
        let q = connecting_orthogonal(&SrFactor::from_matrix(b.clone()), &SrFactor::from_matrix(c.clone()), &tol).unwrap();
        orth = orth.max((q.transpose() * &q - DMatrix::<f64>::identity(r, r)).amax());
        recon = recon.max((&b - &q * &c).norm() / b.norm());
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        9,
        orth <= 1e-10 && recon <= 1e-10,
        &format!("1000 pairs, max |Q^T Q - I| {orth:.2e} (<= 1e-10), max |B - QC| / |B| {recon:.2e} (<= 1e-10), {elapsed:.3} s"),
    );
}

#[test]
fn criterion_10_rank_two_totality() {
    let t = Instant::now();
    let tol = cprank::Tolerances::default();
    let styles = [DnStyle::GramNonneg, DnStyle::RotatedNonneg, DnStyle::Soules];
    let mut failures = 0;
    let mut worst = 0.0f64;
    for k in 0..1000u64 {
        let n = 2 + (k as usize % 9);
        let a = random_dn(n, 2, 10_000 + k, styles[k as usize % 3]).unwrap();
        match rank2_factor(&a, &tol) {
            Ok(cert) if cert.rows() == 2 && verify_certificate(&a, &cert, &tol).pass => {
                worst = worst.max(cert.residual);
                if cert.residual > 1e-9 {
                    failures += 1;
                }
            }
            _ => failures += 1,
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        10,
        failures == 0 && worst <= 1e-9,
        &format!("1000 DN(n,2) instances, n <= 10: {failures} failures, max residual {worst:.2e} (<= 1e-9), {elapsed:.3} s"),
    );
}

#[test]
fn criterion_11_small_rotation_totality() {
    let t = Instant::now();
    let tol = cprank::Tolerances::default();
    let styles = [DnStyle::GramNonneg, DnStyle::RotatedNonneg, DnStyle::Soules];
    let mut failures = 0;
    let mut trials = 0;
    for r in [3usize, 4] {
        for k in 0..1000u64 {
            let a = random_dn(r, r, 110_000 * r as u64 + k, styles[k as usize % 3]).unwrap();
            let b = sr_factor(&a, &tol).unwrap();
            trials += 1;
            match orthant_factor(&a, &b, SearchBudget::default(), k, &tol, false) {
                Ok(Some(cert)) if cert.rows() == r && verify_certificate(&a, &cert, &tol).pass => {}
                _ => failures += 1,
            }
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        11,
        failures == 0,
        &format!("{trials} DN(r,r) instances, r in {{3,4}}: {failures} failures, {elapsed:.3} s"),
    );
}

/// Extreme rays of a pointed 3-D cone from the convex hull of its
/// cross-section. Parallel columns keep the first index.
fn hull_oracle(v: &DMatrix<f64>) -> Vec<usize> {
    let units: Vec<DVector<f64>> = v.column_iter().map(|c| c.normalize()).collect();
    let axis = units.iter().fold(DVector::zeros(3), |acc, u| acc + u).normalize();
    let helper = if axis[0].abs() < 0.9 {
        DVector::from_vec(vec![1.0, 0.0, 0.0])
    } else {
        DVector::from_vec(vec![0.0, 1.0, 0.0])
    };
    let e1 = (&helper - &axis * axis.dot(&helper)).normalize();
    let e2 = axis.cross(&e1);
    let mut pts: Vec<(f64, f64, usize)> = Vec::new();
    for (j, u) in units.iter().enumerate() {
        let p = u / u.dot(&axis);
        let (x, y) = (p.dot(&e1), p.dot(&e2));
        if !pts.iter().any(|&(a, b, _)| (a - x).abs() < 1e-9 && (b - y).abs() < 1e-9) {
            pts.push((x, y, j));
        }
    }
    if pts.len() <= 2 {
        let mut idx: Vec<usize> = pts.iter().map(|p| p.2).collect();
        idx.sort_unstable();
        return idx;
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: &(f64, f64, usize), a: &(f64, f64, usize), b: &(f64, f64, usize)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64, usize)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64, usize)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for p in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 1e-12 {
                hull.pop();
            }
            hull.push(*p);
        }
        hull.pop();
    }
    let mut idx: Vec<usize> = hull.iter().map(|p| p.2).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

#[test]
fn criterion_12_extreme_ray_oracle() {
    let t = Instant::now();
    let tol = cprank::Tolerances::default();
    let styles = [DnStyle::GramNonneg, DnStyle::RotatedNonneg, DnStyle::Soules];
    let mut mismatches = 0;
    let mut count_mismatches = 0;
    for k in 0..200u64 {
        let n = 3 + (k as usize % 6);
        let a = random_dn(n, 3, 120_000 + k, styles[k as usize % 3]).unwrap();
        let b = sr_factor(&a, &tol).unwrap();
        let nnls_rays = extreme_rays(&a, &tol).unwrap();
        if nnls_rays.extreme_indices != hull_oracle(b.matrix()) {
            mismatches += 1;
        }
        if extreme_rays_of_columns(a.as_matrix()).m != nnls_rays.m {
            count_mismatches += 1;
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        12,
        mismatches == 0 && count_mismatches == 0,
        &format!(
            "200 rank 3 DN instances, n <= 8: {mismatches} index mismatches against the hull oracle, \
             {count_mismatches} count mismatches between columns of A and of B, {elapsed:.3} s"
        ),
    );
}

#[test]
fn criterion_13_kaykobad() {
    let t = Instant::now();
    let tol = cprank::Tolerances::default();
    let mut bad_count = 0;
    let mut worst = 0.0f64;
    let mut g = rng(13);
    for k in 0..200u64 {
        let n = g.random_range(1..=10usize);
        let a = random_diagonally_dominant(n, 13_000 + k);
        let edges = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| a.get(i, j) != 0.0)
            .count();
        let strict = (0..n)
            .filter(|&i| a.get(i, i) > (0..n).filter(|&j| j != i).map(|j| a.get(i, j)).sum::<f64>())
            .count();
        match kaykobad_factor(&a, &tol).unwrap() {
            Some(kk) => {
                if kk.certificate.rows() != edges + strict {
                    bad_count += 1;
                }
                worst = worst.max(relative_gram_residual(&a, &kk.certificate.factor));
            }
            None => bad_count += 1,
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        13,
        bad_count == 0 && worst <= 1e-12,
        &format!("200 diagonally dominant matrices: {bad_count} row-count mismatches, max residual {worst:.2e} (<= 1e-12), {elapsed:.3} s"),
    );
}

#[test]
fn criterion_14_determinism() {
    let t = Instant::now();
    let mut identical = true;
    for id in PaperExample::ALL {
        let config = AnalyzeConfig {
            tol: id.tolerances(),
            seed: 1234,
            ..AnalyzeConfig::default()
        };
        let a: SymmetricMatrix = paper_matrix(id);
        let first = to_json(&analyze(&a, &config).unwrap());
        for _ in 0..3 {
            identical &= to_json(&analyze(&a, &config).unwrap()) == first;
        }
    }
    let elapsed = t.elapsed().as_secs_f64();
    check(
        14,
        identical,
        &format!("six fixtures, four runs each, byte-identical JSON: {identical}, {elapsed:.3} s"),
    );
}
