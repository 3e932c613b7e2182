//! Cluster quality index and the sweep over `k` used to pick the number of
//! clusters.
//!
//! `I = mean(log intra) - mean(log inter) - alpha * |singletons|`, where
//! `intra[i]` is the smallest accessibility from centroid `i` to its members and
//! `inter[i][j]` is the mean accessibility from the members of cluster `i` to
//! centroid `j` (one on the diagonal). The inter mean runs over all `k²`
//! entries, diagonal included.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::AccessibilityMatrix;
use crate::cluster::{k_access, restart_seed, ClusteringResult, KAccessConfig};
use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_SEEDS_PER_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QualityReport {
    pub a_intra: Vec<f64>,
    pub a_inter: Vec<Vec<f64>>,
    /// Centroids whose cluster has exactly one member.
    pub omega: Vec<usize>,
    pub alpha: f64,
    pub index: f64,
}

impl QualityReport {
    pub fn mean_log_intra(&self) -> f64 {
        mean(self.a_intra.iter().map(|v| v.ln()))
    }

    pub fn mean_log_inter(&self) -> f64 {
        mean(self.a_inter.iter().flatten().map(|v| v.ln()))
    }

    pub fn num_singletons(&self) -> usize {
        self.omega.len()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, len) = values.fold((0.0, 0usize), |(s, l), v| (s + v, l + 1));
    sum / len as f64
}

fn members_by_cluster(result: &ClusteringResult) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); result.c_index.len()];
    for (i, l) in result.labels().into_iter().enumerate() {
        members[l].push(i);
    }
    members
}

/// `intra[i] = min over members j of A[c_i, j]`.
pub fn intra_accessibility(a: &AccessibilityMatrix, result: &ClusteringResult) -> Vec<f64> {
    members_by_cluster(result)
        .iter()
        .zip(&result.c_index)
        .map(|(m, &c)| m.iter().map(|&j| a.get(c, j)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// `inter[i][j] = mean over members l of cluster i of A[l, c_j]`, unit diagonal.
pub fn inter_accessibility(a: &AccessibilityMatrix, result: &ClusteringResult) -> Vec<Vec<f64>> {
    let members = members_by_cluster(result);
    let k = result.c_index.len();
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        let cj = result.c_index[j];
                        let m = &members[i];
                        m.iter().map(|&l| a.get(l, cj)).sum::<f64>() / m.len() as f64
                    }
                })
                .collect()
        })
        .collect()
}

pub fn quality_index(a: &AccessibilityMatrix, result: &ClusteringResult, alpha: f64) -> Result<QualityReport> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be ≥ 0, got {alpha}")));
    }
    result.check(a)?;
    let sizes = result.cluster_sizes();
    let omega = result
        .c_index
        .iter()
        .zip(&sizes)
        .filter(|(_, &s)| s == 1)
        .map(|(&c, _)| c)
        .collect();
    let mut report = QualityReport {
        a_intra: intra_accessibility(a, result),
        a_inter: inter_accessibility(a, result),
        omega,
        alpha,
        index: 0.0,
    };
    report.index =
        report.mean_log_intra() - report.mean_log_inter() - alpha * report.num_singletons() as f64;
    Ok(report)
}

/// One `(k, seed)` run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRun {
    pub k: usize,
    pub seed: u64,
    pub index: f64,
    pub iterations: usize,
    pub num_singletons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepFailure {
    pub k: usize,
    pub seed: u64,
    pub message: String,
}

/// Best run for one value of `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepEntry {
    pub k: usize,
    pub report: QualityReport,
    pub result: ClusteringResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepReport {
    pub runs: Vec<SweepRun>,
    pub failures: Vec<SweepFailure>,
    pub best: Vec<SweepEntry>,
    /// `k` with the largest best index (smallest `k` on ties).
    pub best_k: Option<usize>,
}

impl SweepReport {
    pub fn entry(&self, k: usize) -> Option<&SweepEntry> {
        self.best.iter().find(|e| e.k == k)
    }

    pub fn best_entry(&self) -> Option<&SweepEntry> {
        self.best_k.and_then(|k| self.entry(k))
    }
}

/// Runs K-Access `seeds_per_k` times for every `k` in `k_min..=k_max` and
/// keeps, per `k`, the run with the largest index. Restart `r` uses
/// `restart_seed(base_seed, r)`. Failed runs are recorded, not fatal.
pub fn sweep_k(
    a: &AccessibilityMatrix,
    k_min: usize,
    k_max: usize,
    alpha: f64,
    seeds_per_k: usize,
    base_seed: u64,
) -> Result<SweepReport> {
    let n = a.n();
    if k_min < 1 || k_min > k_max || k_max > n {
        return Err(Error::InvalidArgument(format!(
            "k range [{k_min}, {k_max}] must lie within [1, {n}]"
        )));
    }
    if seeds_per_k == 0 {
        return Err(Error::InvalidArgument("seeds_per_k must be ≥ 1".into()));
    }
    let jobs: Vec<(usize, u64)> = (k_min..=k_max)
        .flat_map(|k| (0..seeds_per_k).map(move |r| (k, restart_seed(base_seed, r))))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(k, seed)| {
            let out = k_access(a, &KAccessConfig::new(k, seed))
                .and_then(|r| quality_index(a, &r, alpha).map(|q| (r, q)));
            ((k, seed), out)
        })
        .collect();

    let mut report = SweepReport {
        runs: Vec::new(),
        failures: Vec::new(),
        best: Vec::new(),
        best_k: None,
    };
    for ((k, seed), out) in outcomes {
        match out {
            Ok((result, quality)) => {
                report.runs.push(SweepRun {
                    k,
                    seed,
                    index: quality.index,
                    iterations: result.iterations,
                    num_singletons: quality.num_singletons(),
                });
                match report.best.last_mut() {
                    Some(e) if e.k == k => {
                        if quality.index > e.report.index {
                            e.report = quality;
                            e.result = result;
                        }
                    }
                    _ => report.best.push(SweepEntry { k, report: quality, result }),
                }
            }
            Err(e) => report.failures.push(SweepFailure {
                k,
                seed,
                message: e.to_string(),
            }),
        }
    }
    report.best_k = report
        .best
        .iter()
        .fold(None::<&SweepEntry>, |acc, e| match acc {
            Some(b) if b.report.index >= e.report.index => Some(b),
            _ => Some(e),
        })
        .map(|e| e.k);
    Ok(report)
}
