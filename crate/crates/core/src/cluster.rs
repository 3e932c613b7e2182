//! K-Access: alternating local search over a directed accessibility matrix.
//!
//! Centroids are seeded furthest-first (smallest summed accessibility in both
//! directions to the centroids already chosen), every sample joins the
//! centroid with the highest accessibility *to* it, and each cluster then moves
//! its centroid to the member whose worst accessibility to the other members is
//! largest. The objective `G = min_i A[a_i, i]` never decreases across either
//! half-step, and it only takes values that are entries of the matrix, so the
//! loop terminates.
//!
//! All argmax/argmin ties resolve to the lowest sample index, except in the
//! assignment step, where they resolve to the earliest position in `c_index`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::access::AccessibilityMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KAccessConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl KAccessConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        check_k(self.k, n)?;
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be ≥ 1".into()));
        }
        Ok(())
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in [1, {n}]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusteringResult {
    pub k: usize,
    pub seed: u64,
    /// Centroid sample indices.
    pub c_index: Vec<usize>,
    /// For every sample, the sample index of its centroid.
    pub assignment: Vec<usize>,
    /// Objective after the initial assignment and after every half-step.
    pub g_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusteringResult {
    pub fn objective(&self) -> f64 {
        self.g_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Members of the cluster at position `cluster` in `c_index`.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        let c = self.c_index[cluster];
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == c)
            .collect()
    }

    /// Cluster position (into `c_index`) for every sample.
    pub fn labels(&self) -> Vec<usize> {
        let pos = centroid_positions(&self.c_index, self.assignment.len());
        self.assignment.iter().map(|&c| pos[c]).collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.c_index.len()];
        for l in self.labels() {
            sizes[l] += 1;
        }
        sizes
    }

    /// Checks the structural invariants against the matrix it came from.
    pub fn check(&self, a: &AccessibilityMatrix) -> Result<()> {
        let n = a.n();
        if self.assignment.len() != n {
            return Err(Error::InvalidArgument(format!(
                "assignment has {} entries for {n} samples",
                self.assignment.len()
            )));
        }
        if self.c_index.len() != self.k {
            return Err(Error::InvalidArgument("c_index length differs from k".into()));
        }
        check_centroids(&self.c_index, n)?;
        let pos = centroid_positions(&self.c_index, n);
        if let Some(&bad) = self.assignment.iter().find(|&&c| c >= n || pos[c] == usize::MAX) {
            return Err(Error::InvalidArgument(format!(
                "sample assigned to {bad}, which is not a centroid"
            )));
        }
        if let Some(empty) = self.cluster_sizes().iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("cluster {empty} is empty")));
        }
        Ok(())
    }
}

fn check_centroids(c_index: &[usize], n: usize) -> Result<()> {
    if c_index.is_empty() {
        return Err(Error::InvalidArgument("no centroids".into()));
    }
    let mut seen = vec![false; n];
    for &c in c_index {
        if c >= n {
            return Err(Error::InvalidArgument(format!("centroid {c} out of range")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidArgument(format!("centroid {c} listed twice")));
        }
    }
    Ok(())
}

/// Lookup table from sample index to position in `c_index` (`usize::MAX` if none).
fn centroid_positions(c_index: &[usize], n: usize) -> Vec<usize> {
    let mut pos = vec![usize::MAX; n];
    for (p, &c) in c_index.iter().enumerate() {
        if c < n {
            pos[c] = p;
        }
    }
    pos
}

/// Seeds `k` centroids; the first is drawn uniformly from all samples.
pub fn init_centroids(a: &AccessibilityMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    check_k(k, a.n())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..a.n());
    init_centroids_from(a, k, first)
}

/// Furthest-first seeding from a given first centroid.
pub fn init_centroids_from(a: &AccessibilityMatrix, k: usize, first: usize) -> Result<Vec<usize>> {
    let n = a.n();
    check_k(k, n)?;
    if first >= n {
        return Err(Error::InvalidArgument(format!("first centroid {first} out of range")));
    }
    let mut chosen = vec![false; n];
    let mut c_access = vec![0.0; n];
    let mut c_index = Vec::with_capacity(k);
    let mut next = first;
    loop {
        chosen[next] = true;
        c_index.push(next);
        if c_index.len() == k {
            break;
        }
        for (j, acc) in c_access.iter_mut().enumerate() {
            *acc += a.get(next, j) + a.get(j, next);
        }
        let mut best = usize::MAX;
        for j in 0..n {
            if !chosen[j] && (best == usize::MAX || c_access[j] < c_access[best]) {
                best = j;
            }
        }
        next = best;
    }
    Ok(c_index)
}

/// Assigns every sample to the centroid with the highest accessibility to it.
pub fn assign(a: &AccessibilityMatrix, c_index: &[usize]) -> Vec<usize> {
    (0..a.n())
        .map(|i| {
            let mut best = c_index[0];
            for &c in &c_index[1..] {
                if a.get(c, i) > a.get(best, i) {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Moves each centroid to the member with the largest worst-case accessibility
/// to the rest of its cluster.
///
/// Fails with [`Error::DuplicateStates`] when a cluster has no members, which
/// can only happen when a centroid was absorbed by a duplicate.
pub fn update_centroids(
    a: &AccessibilityMatrix,
    c_index: &[usize],
    assignment: &[usize],
) -> Result<Vec<usize>> {
    let n = a.n();
    let pos = centroid_positions(c_index, n);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c_index.len()];
    for (i, &c) in assignment.iter().enumerate() {
        members[pos[c]].push(i);
    }
    c_index
        .iter()
        .zip(&members)
        .map(|(&c, m)| {
            if m.is_empty() {
                return Err(Error::DuplicateStates {
                    centroid: c,
                    absorbed_by: assignment[c],
                });
            }
            Ok(maximin_member(a, m))
        })
        .collect()
}

/// argmax over `members` of the min accessibility to the other members;
/// `members` is sorted, so ties keep the lowest index.
fn maximin_member(a: &AccessibilityMatrix, members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_val = f64::NEG_INFINITY;
    for &j in members {
        let row = a.row(j);
        let worst = members.iter().fold(f64::INFINITY, |m, &l| m.min(row[l]));
        if worst > best_val {
            best_val = worst;
            best = j;
        }
    }
    best
}

/// `G = min_i A[assignment[i], i]`.
pub fn objective_g(a: &AccessibilityMatrix, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| a.get(c, i))
        .fold(f64::INFINITY, f64::min)
}

/// Rejects assignments where a centroid is not in its own cluster.
fn check_self_assigned(c_index: &[usize], assignment: &[usize]) -> Result<()> {
    for &c in c_index {
        if assignment[c] != c {
            return Err(Error::DuplicateStates {
                centroid: c,
                absorbed_by: assignment[c],
            });
        }
    }
    Ok(())
}

/// Runs K-Access with a random first centroid drawn from `config.seed`.
pub fn k_access(a: &AccessibilityMatrix, config: &KAccessConfig) -> Result<ClusteringResult> {
    config.check(a.n())?;
    let init = init_centroids(a, config.k, config.seed)?;
    k_access_from(a, init, config)
}

/// Runs the assignment/update loop from explicit starting centroids.
pub fn k_access_from(
    a: &AccessibilityMatrix,
    mut c_index: Vec<usize>,
    config: &KAccessConfig,
) -> Result<ClusteringResult> {
    let n = a.n();
    config.check(n)?;
    check_centroids(&c_index, n)?;
    if c_index.len() != config.k {
        return Err(Error::InvalidArgument(format!(
            "{} starting centroids for k = {}",
            c_index.len(),
            config.k
        )));
    }

    let mut assignment = assign(a, &c_index);
    check_self_assigned(&c_index, &assignment)?;
    let mut g_trace = vec![objective_g(a, &assignment)];
    let mut iterations = 0;

    loop {
        if iterations == config.max_iterations {
            return Err(Error::NonConvergence { iterations });
        }
        iterations += 1;
        let previous = assignment.clone();

        let updated = update_centroids(a, &c_index, &assignment)?;
        let pos = centroid_positions(&c_index, n);
        for c in assignment.iter_mut() {
            *c = updated[pos[*c]];
        }
        c_index = updated;
        push_monotone(&mut g_trace, objective_g(a, &assignment));

        assignment = assign(a, &c_index);
        check_self_assigned(&c_index, &assignment)?;
        push_monotone(&mut g_trace, objective_g(a, &assignment));

        if assignment == previous {
            break;
        }
    }

    Ok(ClusteringResult {
        k: config.k,
        seed: config.seed,
        c_index,
        assignment,
        g_trace,
        iterations,
    })
}

fn push_monotone(trace: &mut Vec<f64>, g: f64) {
    debug_assert!(
        trace.last().is_none_or(|&prev| g >= prev),
        "objective decreased: {:?} -> {g}",
        trace.last()
    );
    trace.push(g);
}

/// Seed used for restart `r` of a run seeded with `base`.
pub fn restart_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Runs `restarts` seeded restarts and keeps the one with the largest final
/// objective (earliest restart on ties). Restarts run in parallel.
pub fn k_access_best_of(
    a: &AccessibilityMatrix,
    k: usize,
    base_seed: u64,
    restarts: usize,
) -> Result<ClusteringResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be ≥ 1".into()));
    }
    let runs: Vec<Result<ClusteringResult>> = (0..restarts)
        .into_par_iter()
        .map(|r| k_access(a, &KAccessConfig::new(k, restart_seed(base_seed, r))))
        .collect();
    let mut best: Option<ClusteringResult> = None;
    for run in runs {
        let run = run?;
        if best.as_ref().is_none_or(|b| run.objective() > b.objective()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f64]]) -> AccessibilityMatrix {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        AccessibilityMatrix::from_rows(&rows, 1e-8).unwrap()
    }

    fn random_matrix(n: usize, seed: u64) -> AccessibilityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AccessibilityMatrix::from_fn(n, 1e-8, |_, _| rng.gen_range(1e-8..1.0)).unwrap()
    }

    #[test]
    fn single_sample() {
        let a = matrix(&[&[1.0]]);
        for seed in 0..5 {
            assert_eq!(init_centroids(&a, 1, seed).unwrap(), vec![0]);
        }
    }

    #[test]
    fn furthest_first_picks_the_isolated_sample() {
        let f = 1e-8;
        let a = matrix(&[&[1.0, 0.9, f], &[0.9, 1.0, f], &[f, f, 1.0]]);
        assert_eq!(init_centroids_from(&a, 2, 0).unwrap(), vec![0, 2]);
    }

    #[test]
    fn k_equal_n_uses_every_sample_once() {
        let a = random_matrix(9, 3);
        let mut c = init_centroids(&a, 9, 11).unwrap();
        c.sort_unstable();
        assert_eq!(c, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn init_rejects_bad_k() {
        let a = random_matrix(4, 0);
        assert!(init_centroids(&a, 0, 0).is_err());
        assert!(init_centroids(&a, 5, 0).is_err());
    }

    #[test]
    fn centroids_assign_to_themselves() {
        let a = random_matrix(12, 5);
        let c = vec![3, 7, 10];
        let asg = assign(&a, &c);
        for &ci in &c {
            assert_eq!(asg[ci], ci);
        }
    }

    #[test]
    fn assignment_ties_go_to_first_listed_centroid() {
        let mut rows = vec![vec![0.3; 6]; 6];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        rows[4][5] = 0.6;
        rows[1][5] = 0.6;
        let a = AccessibilityMatrix::from_rows(&rows, 1e-8).unwrap();
        assert_eq!(assign(&a, &[4, 1])[5], 4);
        assert_eq!(assign(&a, &[1, 4])[5], 1);
    }

    #[test]
    fn assignment_takes_the_argmax() {
        let a = matrix(&[
            &[1.0, 0.5, 0.5, 0.2],
            &[0.5, 1.0, 0.5, 0.7],
            &[0.5, 0.5, 1.0, 0.1],
            &[0.5, 0.5, 0.5, 1.0],
        ]);
        assert_eq!(assign(&a, &[0, 1])[3], 1);
    }

    #[test]
    fn singleton_cluster_keeps_its_centroid() {
        let a = random_matrix(10, 1);
        let c = vec![7, 2];
        let asg: Vec<usize> = (0..10).map(|i| if i == 7 { 7 } else { 2 }).collect();
        let new = update_centroids(&a, &c, &asg).unwrap();
        assert_eq!(new[0], 7);
    }

    #[test]
    fn update_takes_maximin_with_low_tie_break() {
        // Row minima over {0,1,2}: 0.3, 0.6, 0.6.
        let a = matrix(&[
            &[1.0, 0.3, 0.5],
            &[0.6, 1.0, 0.7],
            &[0.8, 0.6, 1.0],
        ]);
        assert_eq!(update_centroids(&a, &[0], &[0, 0, 0]).unwrap(), vec![1]);
        assert_eq!(update_centroids(&a, &[2], &[2, 2, 2]).unwrap(), vec![1]);
        // Already optimal centroid stays.
        assert_eq!(update_centroids(&a, &[1], &[1, 1, 1]).unwrap(), vec![1]);
    }

    #[test]
    fn objective_examples() {
        let a = matrix(&[&[1.0, 0.5, 0.25], &[0.1, 1.0, 0.1], &[0.1, 0.1, 1.0]]);
        assert_eq!(objective_g(&a, &[0, 0, 0]), 0.25);
        assert_eq!(objective_g(&a, &[0, 1, 2]), 1.0);
    }

    #[test]
    fn one_cluster_picks_the_global_maximin() {
        let a = random_matrix(15, 9);
        let r = k_access(&a, &KAccessConfig::new(1, 4)).unwrap();
        let expected = (0..15)
            .max_by(|&x, &y| {
                let mx = a.row(x).iter().cloned().fold(f64::INFINITY, f64::min);
                let my = a.row(y).iter().cloned().fold(f64::INFINITY, f64::min);
                mx.partial_cmp(&my).unwrap().then(y.cmp(&x))
            })
            .unwrap();
        assert_eq!(r.c_index, vec![expected]);
        assert!(r.assignment.iter().all(|&c| c == expected));
    }

    #[test]
    fn k_equal_n_has_unit_objective() {
        let a = random_matrix(7, 2);
        let r = k_access(&a, &KAccessConfig::new(7, 0)).unwrap();
        assert_eq!(r.objective(), 1.0);
    }

    #[test]
    fn duplicate_centroid_is_diagnosed() {
        let a = matrix(&[&[1.0, 1.0, 0.2], &[1.0, 1.0, 0.3], &[0.2, 0.2, 1.0]]);
        let err = k_access_from(&a, vec![0, 1], &KAccessConfig::new(2, 0)).unwrap_err();
        assert!(matches!(err, Error::DuplicateStates { centroid: 1, absorbed_by: 0 }), "{err}");
    }

    #[test]
    fn starting_centroids_are_validated() {
        let a = random_matrix(5, 0);
        let cfg = KAccessConfig::new(2, 0);
        assert!(k_access_from(&a, vec![1, 1], &cfg).is_err());
        assert!(k_access_from(&a, vec![1, 9], &cfg).is_err());
        assert!(k_access_from(&a, vec![1], &cfg).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let a = random_matrix(30, 8);
        let mut cfg = KAccessConfig::new(4, 1);
        let full = k_access(&a, &cfg).unwrap();
        if full.iterations > 1 {
            cfg.max_iterations = full.iterations - 1;
            assert!(matches!(k_access(&a, &cfg), Err(Error::NonConvergence { .. })));
        }
    }

    #[test]
    fn result_passes_its_own_check() {
        let a = random_matrix(25, 4);
        let r = k_access(&a, &KAccessConfig::new(5, 2)).unwrap();
        r.check(&a).unwrap();
        assert_eq!(r.cluster_sizes().iter().sum::<usize>(), 25);
        let mut bad = r.clone();
        bad.assignment[0] = 25;
        assert!(bad.check(&a).is_err());
    }

    #[test]
    fn best_of_is_no_worse_than_any_restart() {
        let a = random_matrix(20, 6);
        let best = k_access_best_of(&a, 3, 10, 6).unwrap();
        for r in 0..6 {
            let run = k_access(&a, &KAccessConfig::new(3, restart_seed(10, r))).unwrap();
            assert!(best.objective() >= run.objective());
        }
    }

    #[test]
    fn json_uses_external_field_names() {
        let a = random_matrix(6, 0);
        let r = k_access(&a, &KAccessConfig::new(2, 3)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["k", "seed", "cIndex", "assignment", "gTrace", "iterations"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
