//! Effective exploration regions and coverage of initial-state sets.
//!
//! The region of a source state is every state reachable in less than `t0`
//! seconds, i.e. every `j` with `A[src, j] > exp(-t0)`. Floor-valued entries
//! never count as reachable.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::{AccessibilityMatrix, TimeCost};
use crate::error::{Error, Result};

pub const DEFAULT_T0: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InitialStateSet {
    pub label: String,
    pub indices: Vec<usize>,
}

impl InitialStateSet {
    pub fn new(label: impl Into<String>, indices: Vec<usize>) -> Self {
        Self {
            label: label.into(),
            indices,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &i in &self.indices {
            if i >= n {
                return Err(Error::InvalidArgument(format!(
                    "set '{}': index {i} out of range",
                    self.label
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!(
                    "set '{}': index {i} repeated",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    pub t0: f64,
    pub coverage: f64,
    pub overlap_ratio: f64,
    /// Number of regions containing each sample.
    pub per_state: Vec<usize>,
}

impl CoverageReport {
    /// `histogram[c]` = number of samples covered by exactly `c` regions.
    pub fn histogram(&self) -> Vec<usize> {
        let max = self.per_state.iter().copied().max().unwrap_or(0);
        let mut h = vec![0; max + 1];
        for &c in &self.per_state {
            h[c] += 1;
        }
        h
    }
}

fn check_t0(t0: f64) -> Result<()> {
    if !(t0 > 0.0) {
        return Err(Error::InvalidArgument(format!("t0 must be positive, got {t0}")));
    }
    Ok(())
}

/// Samples reachable from `source` in less than `t0` seconds, ascending.
pub fn effective_region(a: &AccessibilityMatrix, source: usize, t0: f64) -> Result<Vec<usize>> {
    check_t0(t0)?;
    if source >= a.n() {
        return Err(Error::InvalidArgument(format!("source {source} out of range")));
    }
    let threshold = (-t0).exp();
    Ok(a.row(source)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold && v > a.floor())
        .map(|(j, _)| j)
        .collect())
}

/// Region computed from raw transition times: `{ j : t(source, j) < t0 }`.
pub fn region_from_times(times: &[TimeCost], n: usize, source: usize, t0: f64) -> Vec<usize> {
    (0..n)
        .filter(|&j| matches!(times[source * n + j], TimeCost::Seconds(s) if s < t0))
        .collect()
}

pub fn coverage_report(a: &AccessibilityMatrix, set: &InitialStateSet, t0: f64) -> Result<CoverageReport> {
    check_t0(t0)?;
    set.validate(a.n())?;
    let regions: Vec<Vec<usize>> = set
        .indices
        .par_iter()
        .map(|&s| effective_region(a, s, t0))
        .collect::<Result<_>>()?;
    let mut per_state = vec![0usize; a.n()];
    for r in &regions {
        for &j in r {
            per_state[j] += 1;
        }
    }
    let union = per_state.iter().filter(|&&c| c > 0).count();
    let total: usize = regions.iter().map(Vec::len).sum();
    Ok(CoverageReport {
        t0,
        coverage: union as f64 / a.n() as f64,
        overlap_ratio: (total - union) as f64 / total.max(1) as f64,
        per_state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankedSet {
    pub rank: usize,
    pub label: String,
    pub size: usize,
    pub report: CoverageReport,
}

/// Reports every set and ranks them by coverage (descending), then overlap
/// (ascending); equal sets keep their input order.
pub fn compare_initializations(
    a: &AccessibilityMatrix,
    sets: &[InitialStateSet],
    t0: f64,
) -> Result<Vec<RankedSet>> {
    if sets.is_empty() {
        return Err(Error::InvalidArgument("no initial-state sets to compare".into()));
    }
    let mut ranked: Vec<RankedSet> = sets
        .iter()
        .map(|s| {
            Ok(RankedSet {
                rank: 0,
                label: s.label.clone(),
                size: s.indices.len(),
                report: coverage_report(a, s, t0)?,
            })
        })
        .collect::<Result<_>>()?;
    ranked.sort_by(|x, y| {
        y.report
            .coverage
            .total_cmp(&x.report.coverage)
            .then(x.report.overlap_ratio.total_cmp(&y.report.overlap_ratio))
    });
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}
