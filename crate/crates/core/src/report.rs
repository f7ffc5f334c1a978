//! JSON and text rendering of analysis results.
//!
//! Reals are written with 17 significant digits; non-finite values become
//! `null`. Keys appear in a fixed order, and timings are left out of the
//! JSON so that repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{CpError, Result};
use crate::pipeline::{AnalysisReport, Detail, Step};
use crate::srfactor::CpCertificate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = CpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(CpError::invalid(format!("unknown report format `{s}`"))),
        }
    }
}

/// An `f64` serialized with 17 significant digits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

pub fn real_rows(m: &DMatrix<f64>) -> Vec<Vec<Real>> {
    m.row_iter().map(|r| r.iter().copied().map(Real).collect()).collect()
}

impl Serialize for Detail {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Detail::Count(c) => s.serialize_u64(*c as u64),
            Detail::Real(x) => Real(*x).serialize(s),
            Detail::Reals(v) => reals(v).serialize(s),
            Detail::Matrix(rows) => rows
                .iter()
                .map(|r| reals(r))
                .collect::<Vec<_>>()
                .serialize(s),
            Detail::Indices(v) => v.serialize(s),
            Detail::Text(t) => s.serialize_str(t),
            Detail::Flag(b) => s.serialize_bool(*b),
        }
    }
}

struct DetailMap<'a>(&'a [(&'static str, Detail)]);

impl Serialize for DetailMap<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct JsonStep<'a> {
    name: &'a str,
    outcome: &'a str,
    details: DetailMap<'a>,
}

#[derive(Serialize)]
pub struct JsonCertificate {
    rows: usize,
    residual: Real,
    entries: Vec<Vec<Real>>,
}

impl From<&CpCertificate> for JsonCertificate {
    fn from(c: &CpCertificate) -> Self {
        JsonCertificate {
            rows: c.rows(),
            residual: Real(c.residual),
            entries: real_rows(&c.factor),
        }
    }
}

#[derive(Serialize)]
struct JsonReport<'a> {
    order: usize,
    rank: usize,
    dn: &'static str,
    verdict: String,
    steps: Vec<JsonStep<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<JsonCertificate>,
    cp_rank_lower: Option<usize>,
    cp_rank_upper: Option<usize>,
    seed: u64,
}

fn json_step(step: &Step) -> JsonStep<'_> {
    JsonStep {
        name: step.name,
        outcome: &step.outcome,
        details: DetailMap(&step.details),
    }
}

pub fn to_json(report: &AnalysisReport) -> String {
    let doc = JsonReport {
        order: report.order,
        rank: report.rank,
        dn: report.dn.label(),
        verdict: report.verdict.label(),
        steps: report.steps.iter().map(json_step).collect(),
        certificate: report.certificate.as_ref().map(JsonCertificate::from),
        cp_rank_lower: report.cp_rank_lower,
        cp_rank_upper: report.cp_rank_upper,
        seed: report.seed,
    };
    to_pretty_json(&doc)
}

/// Pretty JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values always serialize");
    s.push('\n');
    s
}

fn detail_text(d: &Detail) -> String {
    let num = |x: f64| format!("{x:.6e}");
    match d {
        Detail::Count(c) => c.to_string(),
        Detail::Real(x) => num(*x),
        Detail::Reals(v) => format!("[{}]", v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")),
        Detail::Matrix(rows) => rows
            .iter()
            .map(|r| format!("[{}]", r.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>()
            .join(" "),
        Detail::Indices(v) => format!("({})", v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")),
        Detail::Text(t) => t.clone(),
        Detail::Flag(b) => b.to_string(),
    }
}

pub fn to_text(report: &AnalysisReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "order      {}", report.order);
    let _ = writeln!(out, "asymmetry  {:.3e}", report.symmetry_defect);
    let _ = writeln!(out, "class      {} (rank {})", report.dn.label(), report.rank);
    let _ = writeln!(out, "verdict    {}", report.verdict.label());
    let bound = |b: Option<usize>| b.map_or("?".to_string(), |v| v.to_string());
    let _ = writeln!(
        out,
        "cp-rank    [{}, {}]",
        bound(report.cp_rank_lower),
        bound(report.cp_rank_upper)
    );
    let _ = writeln!(out, "seed       {}", report.seed);
    let _ = writeln!(out, "\nsteps:");
    for step in &report.steps {
        let _ = writeln!(
            out,
            "  {:<20} {:<16} {:>10.3} ms",
            step.name,
            step.outcome,
            step.elapsed.as_secs_f64() * 1e3
        );
        for (k, v) in &step.details {
            let _ = writeln!(out, "      {k}: {}", detail_text(v));
        }
    }
    if let Some(c) = &report.certificate {
        let _ = writeln!(
            out,
            "\ncertificate ({} rows, method {}, residual {:.3e}):",
            c.rows(),
            c.method.tag(),
            c.residual
        );
        for row in c.factor.row_iter() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:>12.6}")).collect();
            let _ = writeln!(out, "  {}", cells.join(" "));
        }
    }
    out
}

pub fn write_report(report: &AnalysisReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => to_json(report).into_bytes(),
        ReportFormat::Text => to_text(report).into_bytes(),
    }
}
