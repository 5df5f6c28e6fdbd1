//! Versioned JSON report types shared by `verify`, `extend` and `norms`.
//! Field order is fixed by struct declaration and collections are vectors,
//! so identical runs serialize byte-identically.

use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn le(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            pass: observed <= bound,
            observed: Some(observed),
            bound: Some(bound),
            note: None,
        }
    }

    pub fn in_range(name: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            pass: (lo..=hi).contains(&observed),
            observed: Some(observed),
            bound: Some(hi),
            note: Some(format!("range [{lo}, {hi}]")),
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            observed: None,
            bound: None,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl SuiteResult {
    pub fn new(name: impl Into<String>, checks: Vec<CheckResult>) -> Self {
        Self {
            name: name.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub schema: u32,
    pub kind: String,
    pub seed: u64,
    pub pass: bool,
    pub suites: Vec<SuiteResult>,
}

/// One (function, λ, J) row of the extension norm-ratio table.
#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub function: String,
    pub lambda: Vec<i64>,
    /// 1-based axes of J; empty = the plain L_p term.
    pub axes: Vec<usize>,
    /// LHS seminorm per truncation level, aligned with `truncations`.
    pub lhs_by_truncation: Vec<f64>,
    pub rhs: f64,
    pub ratio: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionRatioReport {
    pub schema: u32,
    pub kind: String,
    pub d: usize,
    pub alpha: Vec<f64>,
    pub p: f64,
    pub theta: String,
    pub m: Vec<i64>,
    pub truncations: Vec<i64>,
    pub stability_tolerance: f64,
    pub rows: Vec<RatioRow>,
    pub recorded_constant: f64,
    pub all_finite: bool,
    pub all_stable: bool,
}
