//! Number formatting and matrix parsing shared by the CSV/JSON exporters.

use std::path::Path;

use crate::error::{OfbmError, Result};
use crate::matfun::SquareMatrix;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Parses a matrix given either inline as JSON rows or as `@path` to a JSON
/// file.
pub fn parse_matrix_arg(arg: &str) -> Result<SquareMatrix> {
    let text = match arg.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(Path::new(path))?,
        None => arg.to_owned(),
    };
    parse_matrix_json(&text)
}

pub fn parse_matrix_json(text: &str) -> Result<SquareMatrix> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    // a bare number is accepted as a 1x1 matrix
    if let Some(x) = value.as_f64() {
        return SquareMatrix::from_rows(&[vec![x]]);
    }
    let rows: Vec<Vec<f64>> = serde_json::from_value(value)
        .map_err(|e| OfbmError::InvalidInput(format!("matrix must be a JSON array of rows: {e}")))?;
    SquareMatrix::from_rows(&rows)
}

pub fn matrix_to_json(m: &SquareMatrix) -> String {
    let rows: Vec<String> = m
        .rows()
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")))
        .collect();
    format!("[{}]", rows.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_round_trips() {
        for x in [0.1, 2.0 / 3.0, -1e-300, 123_456_789.123_456_79, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn matrix_json_round_trips_exactly() {
        let m = SquareMatrix::from_rows(&[vec![0.75, 0.2 / 3.0], vec![0.0, 0.6]]).unwrap();
        let back = parse_matrix_json(&matrix_to_json(&m)).unwrap();
        assert_eq!(m, back);
        assert_eq!(parse_matrix_arg("0.75").unwrap(), SquareMatrix::from_rows(&[vec![0.75]]).unwrap());
        assert!(parse_matrix_arg("[[1,2],[3]]").is_err());
    }
}
