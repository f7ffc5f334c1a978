//! Matrix file formats.
//!
//! Dense text: the order `n` followed by `n * n` whitespace separated
//! entries in row-major order. CSV: `n` lines of `n` comma separated values.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{CpError, Result};
use crate::matcore::SymmetricMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    DenseText,
    Csv,
}

impl FromStr for MatrixFormat {
    type Err = CpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" | "dense_text" | "txt" => Ok(MatrixFormat::DenseText),
            "csv" => Ok(MatrixFormat::Csv),
            _ => Err(CpError::invalid(format!("unknown matrix format `{s}`"))),
        }
    }
}

pub fn read_matrix(path: &Path, format: MatrixFormat, eps_sym: f64) -> Result<SymmetricMatrix> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix(&text, format, eps_sym)
}

pub fn parse_matrix(text: &str, format: MatrixFormat, eps_sym: f64) -> Result<SymmetricMatrix> {
    let data = match format {
        MatrixFormat::DenseText => parse_dense(text)?,
        MatrixFormat::Csv => parse_csv(text)?,
    };
    SymmetricMatrix::new(data, eps_sym)
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> CpError {
    CpError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_entry(token: &str, line: usize, column: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_error(line, column, format!("`{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(line, column, format!("`{token}` is not finite")));
    }
    Ok(v)
}

fn parse_dense(text: &str) -> Result<DMatrix<f64>> {
    let mut tokens = text.lines().enumerate().flat_map(|(ln, line)| {
        let base = line.as_ptr() as usize;
        line.split_whitespace()
            .map(move |tok| (ln + 1, tok.as_ptr() as usize - base + 1, tok))
    });
    let (line, column, first) = tokens.next().ok_or_else(|| parse_error(1, 1, "empty input"))?;
    let n: usize = first
        .parse()
        .map_err(|_| parse_error(line, column, format!("expected the matrix order, found `{first}`")))?;
    if n == 0 {
        return Err(parse_error(line, column, "matrix order must be at least 1"));
    }
    let mut values = Vec::with_capacity(n * n);
    let mut last = (line, column + first.len());
    for (line, column, tok) in tokens.by_ref() {
        if values.len() == n * n {
            return Err(parse_error(line, column, format!("unexpected extra entry `{tok}`")));
        }
        values.push(parse_entry(tok, line, column)?);
        last = (line, column + tok.len());
    }
    if values.len() < n * n {
        return Err(parse_error(
            last.0,
            last.1,
            format!("expected {} entries, found {}", n * n, values.len()),
        ));
    }
    Ok(DMatrix::from_row_slice(n, n, &values))
}

fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(line, 1, e.to_string())
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (k, field) in record.iter().enumerate() {
            row.push(parse_entry(field, line, k + 1)?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    line,
                    row.len().min(first.len()) + 1,
                    format!("row has {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_error(1, 1, "empty input"));
    }
    if rows[0].len() != n {
        return Err(parse_error(
            1,
            1,
            format!("{n} rows of {} fields; matrix must be square", rows[0].len()),
        ));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Serializes with shortest round-trip formatting, so reading the output
/// back gives the same bits.
pub fn format_matrix(a: &SymmetricMatrix, format: MatrixFormat) -> String {
    let n = a.order();
    let mut out = String::new();
    match format {
        MatrixFormat::DenseText => {
            let _ = writeln!(out, "{n}");
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| a.get(i, j).to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        MatrixFormat::Csv => {
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| a.get(i, j).to_string()).collect();
                let _ = writeln!(out, "{}", row.join(","));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{paper_matrix, PaperExample};

    #[test]
    fn dense_identity() {
        let a = parse_matrix("2\n1 0\n0 1", MatrixFormat::DenseText, 1e-10).unwrap();
        assert_eq!(a, SymmetricMatrix::identity(2));
    }

    #[test]
    fn csv_round_trip() {
        for id in PaperExample::ALL {
            let a = paper_matrix(id);
            for format in [MatrixFormat::DenseText, MatrixFormat::Csv] {
                let back = parse_matrix(&format_matrix(&a, format), format, 0.0).unwrap();
                assert_eq!(back, a);
            }
        }
    }

    #[test]
    fn parse_errors_locate_tokens() {
        match parse_matrix("2\n1 x\n0 1", MatrixFormat::DenseText, 1e-10) {
            Err(CpError::Parse { line, column, .. }) => assert_eq!((line, column), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_matrix("2\n1 0\n0", MatrixFormat::DenseText, 1e-10),
            Err(CpError::Parse { .. })
        ));
        assert!(matches!(
            parse_matrix("2\n1 0\n0 1 5", MatrixFormat::DenseText, 1e-10),
            Err(CpError::Parse { line: 3, column: 5, .. })
        ));
        match parse_matrix("1,0\n0\n", MatrixFormat::Csv, 1e-10) {
            Err(CpError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_matrix("2\n1 1\n0 1", MatrixFormat::DenseText, 1e-10),
            Err(CpError::InvalidInput(_))
        ));
    }
}
