//! Matrix input and number formatting shared by the library and the CLI.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct JsonMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Parses a matrix from CSV rows or the JSON form `{"rows", "cols", "data"}` (row-major).
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let m: JsonMatrix = serde_json::from_str(trimmed).map_err(|e| Error::Input(format!("matrix JSON: {e}")))?;
        if m.rows == 0 || m.cols == 0 || m.data.len() != m.rows * m.cols {
            return Err(Error::Input(format!(
                "matrix JSON declares {}x{} but carries {} entries",
                m.rows,
                m.cols,
                m.data.len()
            )));
        }
        return checked(DMatrix::from_row_slice(m.rows, m.cols, &m.data));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Input(format!("matrix CSV: {e}")))?;
        let row = rec
            .iter()
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<f64>().map_err(|_| Error::Input(format!("row {}: bad number {f:?}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        if !row.is_empty() {
            rows.push(row);
        }
    }
    let n = rows.first().map(|r| r.len()).ok_or_else(|| Error::Input("empty matrix".into()))?;
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Input(format!("row {} has {} entries, expected {n}", bad + 1, rows[bad].len())));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    checked(DMatrix::from_row_slice(rows.len(), n, &flat))
}

fn checked(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("matrix has non-finite entries".into()));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_matrix(&text)
}

/// Matrix as CSV rows with 12 significant digits.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| sig12(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Rounds to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Decimal text of `x` rounded to 12 significant digits; `inf`/`-inf`/`nan` otherwise.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{}", round12(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_agree() {
        let a = parse_matrix("1, 2, 3\n4,5,6\n").unwrap();
        let b = parse_matrix(r#"{"rows": 2, "cols": 3, "data": [1,2,3,4,5,6]}"#).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[(1, 0)], 4.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_matrix("1,2\n3\n").is_err());
        assert!(parse_matrix("1,x\n").is_err());
        assert!(parse_matrix(r#"{"rows": 2, "cols": 2, "data": [1]}"#).is_err());
        assert!(parse_matrix("").is_err());
        assert!(parse_matrix("1,inf\n").is_err());
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(sig12(1.782_213_739_004_281_3), "1.782213739");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(f64::INFINITY), "inf");
        let m = parse_matrix("0.1,2\n").unwrap();
        assert_eq!(parse_matrix(&matrix_to_csv(&m)).unwrap(), m);
    }
}
