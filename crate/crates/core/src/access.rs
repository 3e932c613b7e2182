//! States, time costs and the directed accessibility matrix.
//!
//! Accessibility from state `i` to state `j` is `exp(-t)` where `t` is the
//! time needed to move from `i` to `j`. Values are clamped from below at a
//! positive floor so that logarithms of any entry stay finite; unreachable
//! pairs map to the floor. Self-accessibility is exactly one.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor used in place of zero accessibility.
pub const DEFAULT_FLOOR: f64 = 1e-8;

/// A sampled state: a feature vector plus its index in the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub id: usize,
    pub values: Vec<f64>,
}

impl StateVector {
    pub fn new(id: usize, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "state {id} has no features"
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "state {id} has a non-finite feature at position {pos}"
            )));
        }
        Ok(Self { id, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Checks that every state in a dataset has the same dimension.
pub fn check_dimensions(states: &[StateVector]) -> Result<()> {
    if let Some(first) = states.first() {
        let d = first.dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != d) {
            return Err(Error::InvalidArgument(format!(
                "state {} has dimension {} but state {} has {}",
                bad.id,
                bad.dim(),
                first.id,
                d
            )));
        }
    }
    Ok(())
}

/// Minimal transition time between two states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeCost {
    Seconds(f64),
    Unreachable,
}

impl TimeCost {
    /// Builds a finite cost; negative or NaN durations are rejected.
    pub fn seconds(s: f64) -> Result<Self> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time cost must be non-negative, got {s}"
            )));
        }
        if s.is_infinite() {
            return Ok(TimeCost::Unreachable);
        }
        Ok(TimeCost::Seconds(s))
    }

    pub fn as_seconds(self) -> Option<f64> {
        match self {
            TimeCost::Seconds(s) => Some(s),
            TimeCost::Unreachable => None,
        }
    }

    pub fn is_reachable(self) -> bool {
        matches!(self, TimeCost::Seconds(_))
    }
}

/// Converts a time cost into accessibility `max(exp(-t), floor)`.
pub fn access_from_time(t: TimeCost, floor: f64) -> f64 {
    match t {
        TimeCost::Seconds(s) => (-s).exp().max(floor),
        TimeCost::Unreachable => floor,
    }
}

/// A problem found while validating matrix data.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Violation {
    Empty,
    Shape { expected: usize, actual: usize },
    InvalidFloor { floor: f64 },
    NonFinite { row: usize, col: usize },
    OutOfRange { row: usize, col: usize, value: f64 },
    DiagonalNotOne { index: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "matrix has no samples"),
            Violation::Shape { expected, actual } => {
                write!(f, "expected {expected} entries, found {actual}")
            }
            Violation::InvalidFloor { floor } => {
                write!(f, "floor {floor} is not in (0, 1)")
            }
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite entry at ({row}, {col})")
            }
            Violation::OutOfRange { row, col, value } => {
                write!(f, "entry out of range at ({row}, {col}): {value}")
            }
            Violation::DiagonalNotOne { index, value } => {
                write!(f, "diagonal ≠ 1 at index {index} (found {value})")
            }
        }
    }
}

/// Non-fatal findings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Warning {
    /// An off-diagonal entry equals one: the two samples are indistinguishable
    /// in at least one direction, which defeats centroid self-assignment.
    PossibleDuplicate { first: usize, second: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::PossibleDuplicate { first, second } => {
                write!(f, "samples {first} and {second} look like duplicates")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 5;
        if self.violations.is_empty() {
            return write!(f, "ok ({} warnings)", self.warnings.len());
        }
        write!(f, "{} violation(s): ", self.violations.len())?;
        for (i, v) in self.violations.iter().take(SHOWN).enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        if self.violations.len() > SHOWN {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Validates raw row-major matrix data without constructing a matrix.
///
/// Every violated invariant is reported, never just the first one.
pub fn validate_matrix(n: usize, entries: &[f64], floor: f64) -> ValidationReport {
    let mut report = ValidationReport::default();
    if n == 0 {
        report.violations.push(Violation::Empty);
    }
    if !(floor > 0.0 && floor < 1.0) {
        report.violations.push(Violation::InvalidFloor { floor });
    }
    if entries.len() != n * n {
        report.violations.push(Violation::Shape {
            expected: n * n,
            actual: entries.len(),
        });
        return report;
    }
    for i in 0..n {
        for j in 0..n {
            let v = entries[i * n + j];
            if !v.is_finite() {
                report.violations.push(Violation::NonFinite { row: i, col: j });
            } else if i == j {
                if v != 1.0 {
                    report
                        .violations
                        .push(Violation::DiagonalNotOne { index: i, value: v });
                }
            } else if v < floor || v > 1.0 {
                report
                    .violations
                    .push(Violation::OutOfRange { row: i, col: j, value: v });
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if entries[i * n + j] == 1.0 || entries[j * n + i] == 1.0 {
                report
                    .warnings
                    .push(Warning::PossibleDuplicate { first: i, second: j });
            }
        }
    }
    report
}

/// Dense directed accessibility matrix; `get(i, j)` is access from `i` to `j`.
///
/// Always valid: entries lie in `[floor, 1]` and the diagonal is one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct AccessibilityMatrix {
    n: usize,
    floor: f64,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    floor: f64,
    entries: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for AccessibilityMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.entries.len() != repr.n || repr.entries.iter().any(|r| r.len() != repr.n) {
            return Err(Error::InvalidArgument(format!(
                "matrix rows do not match n = {}",
                repr.n
            )));
        }
        let flat = repr.entries.into_iter().flatten().collect();
        AccessibilityMatrix::new(repr.n, flat, repr.floor)
    }
}

impl From<AccessibilityMatrix> for MatrixRepr {
    fn from(m: AccessibilityMatrix) -> Self {
        let entries = m.entries.chunks(m.n).map(<[f64]>::to_vec).collect();
        MatrixRepr {
            n: m.n,
            floor: m.floor,
            entries,
        }
    }
}

impl AccessibilityMatrix {
    /// Builds a matrix from row-major entries, rejecting invalid data.
    pub fn new(n: usize, entries: Vec<f64>, floor: f64) -> Result<Self> {
        let report = validate_matrix(n, &entries, floor);
        if !report.is_ok() {
            return Err(Error::InvalidMatrix(report));
        }
        Ok(Self { n, floor, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>], floor: f64) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} has {} entries, expected {n}",
                rows[bad].len()
            )));
        }
        Self::new(n, rows.concat(), floor)
    }

    /// Builds a matrix from a pairwise function. The diagonal is forced to
    /// one and off-diagonal values are clamped into `[floor, 1]`.
    pub fn from_fn(n: usize, floor: f64, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(if i == j { 1.0 } else { f(i, j).clamp(floor, 1.0) });
            }
        }
        Self::new(n, entries, floor)
    }

    /// Builds a matrix from pairwise time costs via [`access_from_time`].
    pub fn from_times(n: usize, floor: f64, mut t: impl FnMut(usize, usize) -> TimeCost) -> Result<Self> {
        Self::from_fn(n, floor, |i, j| access_from_time(t(i, j), floor))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn floor(&self) -> f64 {
        self.floor
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from * self.n + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.entries[from * self.n..(from + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_floor(&self, from: usize, to: usize) -> bool {
        self.get(from, to) <= self.floor
    }

    pub fn validate(&self) -> ValidationReport {
        validate_matrix(self.n, &self.entries, self.floor)
    }

    /// Restricts the matrix to the given samples, in the given order.
    pub fn submatrix(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n) {
            return Err(Error::InvalidArgument(format!("index {bad} out of range")));
        }
        let m = indices.len();
        let mut entries = Vec::with_capacity(m * m);
        for &i in indices {
            for &j in indices {
                entries.push(self.get(i, j));
            }
        }
        Self::new(m, entries, self.floor)
    }
}
