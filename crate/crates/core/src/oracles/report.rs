use serde::Serialize;

use crate::linalg::{max_column_rel_error, serde_rows, Matrix};

/// One oracle comparison. `pass` holds exactly when `max_rel_err` is within
/// `tolerance`.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub name: String,
    #[serde(with = "serde_rows")]
    pub analytic: Matrix,
    #[serde(with = "serde_rows")]
    pub numeric: Matrix,
    pub max_rel_err: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Column-wise relative comparison.
    pub fn compare(name: impl Into<String>, analytic: Matrix, numeric: Matrix, tolerance: f64) -> Self {
        let err = if analytic.shape() == numeric.shape() {
            max_column_rel_error(&analytic, &numeric)
        } else {
            f64::INFINITY
        };
        Self::with_error(name, analytic, numeric, err, tolerance)
    }

    /// Comparison whose error measure is computed by the caller.
    pub fn with_error(
        name: impl Into<String>,
        analytic: Matrix,
        numeric: Matrix,
        max_rel_err: f64,
        tolerance: f64,
    ) -> Self {
        OracleReport {
            name: name.into(),
            analytic,
            numeric,
            max_rel_err,
            tolerance,
            // NaN errors fail.
            pass: max_rel_err <= tolerance,
        }
    }
}
