use serde::{Deserialize, Serialize};

/// One residual measurement from a verification suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub indices: Vec<i64>,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// A check passes when the residual is finite and strictly below the tolerance.
    pub fn new(check: impl Into<String>, indices: Vec<i64>, residual: f64, tolerance: f64) -> Self {
        CheckRecord {
            check: check.into(),
            indices,
            residual,
            tolerance,
            pass: residual.is_finite() && residual < tolerance,
        }
    }

    /// A boolean check; the residual is 0 on success and 1 on failure.
    pub fn flag(check: impl Into<String>, indices: Vec<i64>, ok: bool) -> Self {
        CheckRecord {
            check: check.into(),
            indices,
            residual: if ok { 0.0 } else { 1.0 },
            tolerance: 0.5,
            pass: ok,
        }
    }
}

pub fn all_pass(records: &[CheckRecord]) -> bool {
    records.iter().all(|r| r.pass)
}

pub fn max_residual(records: &[CheckRecord]) -> f64 {
    records.iter().map(|r| r.residual).fold(0.0, f64::max)
}
