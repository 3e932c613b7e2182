//! Planted-partition accessibility matrices with known ground truth, plus an
//! exhaustive optimum of the clustering objective for small instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::access::{AccessibilityMatrix, TimeCost, DEFAULT_FLOOR};
use crate::error::{Error, Result};

/// Parameters of the additive cost model
/// `t(i, j) = escape[i] + depth[j] + hop_cost * [group(i) != group(j)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlantedSpec {
    pub n: usize,
    pub k_star: usize,
    pub escape_max: f64,
    pub depth_max: f64,
    pub hop_cost: f64,
    /// Probability that a cross-group pair is unreachable.
    pub block_prob: f64,
    pub floor: f64,
    pub seed: u64,
}

impl PlantedSpec {
    pub fn new(n: usize, k_star: usize, seed: u64) -> Self {
        Self {
            n,
            k_star,
            escape_max: 0.2,
            depth_max: 0.5,
            hop_cost: 3.0,
            block_prob: 0.2,
            floor: DEFAULT_FLOOR,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("planted spec: {msg}")));
        if self.n == 0 || self.k_star == 0 || self.k_star > self.n {
            return bad("need 1 ≤ k_star ≤ n");
        }
        if !(self.escape_max > 0.0 && self.depth_max > 0.0 && self.hop_cost > 0.0) {
            return bad("cost parameters must be positive");
        }
        if !(0.0..=1.0).contains(&self.block_prob) {
            return bad("block_prob must lie in [0, 1]");
        }
        if !(self.floor > 0.0 && self.floor < 1.0) {
            return bad("floor must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedData {
    pub matrix: AccessibilityMatrix,
    /// Ground-truth group of every sample.
    pub labels: Vec<usize>,
    /// Per-sample cost of leaving the state.
    pub escape: Vec<f64>,
    /// Per-sample cost of settling into the state.
    pub depth: Vec<f64>,
    /// `blocked[i * n + j]` marks cross-group pairs forced unreachable.
    pub blocked: Vec<bool>,
    pub spec: PlantedSpec,
}

impl PlantedData {
    pub fn time_cost(&self, i: usize, j: usize) -> TimeCost {
        if i == j {
            return TimeCost::Seconds(0.0);
        }
        let n = self.labels.len();
        if self.blocked[i * n + j] {
            return TimeCost::Unreachable;
        }
        let hop = if self.labels[i] != self.labels[j] {
            self.spec.hop_cost
        } else {
            0.0
        };
        TimeCost::Seconds(self.escape[i] + self.depth[j] + hop)
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == group)
            .collect()
    }
}

/// Generates a planted matrix; groups are balanced (`i % k_star`).
pub fn generate_planted(spec: &PlantedSpec) -> Result<PlantedData> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels: Vec<usize> = (0..n).map(|i| i % spec.k_star).collect();
    let escape: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * spec.escape_max).collect();
    let depth: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * spec.depth_max).collect();
    let mut blocked = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                blocked[i * n + j] = rng.gen::<f64>() < spec.block_prob;
            }
        }
    }
    let mut data = PlantedData {
        matrix: AccessibilityMatrix::from_fn(1, spec.floor, |_, _| 1.0)?,
        labels,
        escape,
        depth,
        blocked,
        spec: *spec,
    };
    data.matrix = AccessibilityMatrix::from_times(n, spec.floor, |i, j| data.time_cost(i, j))?;
    Ok(data)
}

/// Largest problem accepted by [`brute_force_best_g`].
pub const BRUTE_FORCE_MAX_N: usize = 10;

/// Exhaustive maximum of `G = min_i A[a(i), i]` over every choice of `k`
/// centroids and every assignment of samples to them.
///
/// Returns the optimum with one optimal `(c_index, assignment)`. Branches whose
/// running minimum can no longer beat the incumbent are pruned, which leaves
/// the optimum unchanged.
pub fn brute_force_best_g(a: &AccessibilityMatrix, k: usize) -> Result<(f64, Vec<usize>, Vec<usize>)> {
    let n = a.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "brute force supports n ≤ {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in [1, {n}]")));
    }

    struct Search<'a> {
        a: &'a AccessibilityMatrix,
        centroids: Vec<usize>,
        current: Vec<usize>,
        best: f64,
        best_centroids: Vec<usize>,
        best_assignment: Vec<usize>,
    }

    impl Search<'_> {
        fn assign_from(&mut self, i: usize, running_min: f64) {
            if running_min <= self.best {
                return;
            }
            if i == self.current.len() {
                self.best = running_min;
                self.best_centroids = self.centroids.clone();
                self.best_assignment = self.current.clone();
                return;
            }
            for p in 0..self.centroids.len() {
                let c = self.centroids[p];
                self.current[i] = c;
                self.assign_from(i + 1, running_min.min(self.a.get(c, i)));
            }
        }
    }

    let mut search = Search {
        a,
        centroids: Vec::with_capacity(k),
        current: vec![0; n],
        best: f64::NEG_INFINITY,
        best_centroids: Vec::new(),
        best_assignment: Vec::new(),
    };
    for subset in combinations(n, k) {
        search.centroids = subset;
        search.assign_from(0, f64::INFINITY);
    }
    Ok((search.best, search.best_centroids, search.best_assignment))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Adjusted Rand index between two labelings of the same samples.
///
/// Returns 1 when both labelings put everything in one cluster (or every
/// sample in its own), where the usual formula is 0/0.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let relabel = |l: &[usize]| {
        let mut map = std::collections::HashMap::new();
        l.iter()
            .map(|&x| {
                let next = map.len();
                *map.entry(x).or_insert(next)
            })
            .collect::<Vec<usize>>()
    };
    let (ra, rb) = (relabel(a), relabel(b));
    let ka = ra.iter().max().map_or(0, |m| m + 1);
    let kb = rb.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in ra.iter().zip(&rb) {
        table[x * kb + y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().map(|&c| pairs(c)).sum();
    let row_sum: f64 = (0..ka)
        .map(|x| pairs((0..kb).map(|y| table[x * kb + y]).sum()))
        .sum();
    let col_sum: f64 = (0..kb)
        .map(|y| pairs((0..ka).map(|x| table[x * kb + y]).sum()))
        .sum();
    let total = pairs(n as u64);
    let expected = row_sum * col_sum / total;
    let max = 0.5 * (row_sum + col_sum);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
