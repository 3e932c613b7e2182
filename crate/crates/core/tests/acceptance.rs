//! Acceptance suite. Every test prints one `PASS`/`FAIL` line with the
//! measured values, then asserts the criterion.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use kaccess::access::AccessibilityMatrix;
use kaccess::cluster::{k_access, k_access_best_of, restart_seed, ClusteringResult, KAccessConfig, DEFAULT_MAX_ITERATIONS};
use kaccess::explore::{coverage_report, InitialStateSet, DEFAULT_T0};
use kaccess::io;
use kaccess::quality::{quality_index, sweep_k, DEFAULT_SEEDS_PER_K};
use kaccess::synthetic::{generate_planted, PlantedSpec};
use kaccess::toy_rl::{benchmark_pair, random_init_set, ArmComparison};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: &str, title: &str, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("[{verdict}] criterion {id}: {title} | {}\n", detail.as_ref());
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

/// Entries uniform in `[1e-8, 1]`, unit diagonal.
fn uniform_matrix(n: usize, rng: &mut ChaCha8Rng) -> AccessibilityMatrix {
    let entries = (0..n * n)
        .map(|p| if p / n == p % n { 1.0 } else { rng.gen_range(1e-8..=1.0) })
        .collect();
    AccessibilityMatrix::new(n, entries, 1e-8).unwrap()
}

/// `G = min_i A[a_i, i]`, straight from the definition.
fn objective(a: &AccessibilityMatrix, assignment: &[usize]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| a.get(c, i))
        .fold(f64::INFINITY, f64::min)
}

fn adjusted_rand(x: &[usize], y: &[usize]) -> f64 {
    let kx = x.iter().max().unwrap() + 1;
    let ky = y.iter().max().unwrap() + 1;
    let mut table = vec![vec![0u64; ky]; kx];
    for (&i, &j) in x.iter().zip(y) {
        table[i][j] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&m| pairs(m)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..ky).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(x.len() as u64);
    let expected = rows * cols / total;
    let max = (rows + cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

struct MonotoneRun {
    violations: usize,
    iterations: usize,
    converged: bool,
}

/// The shared 200-run workload for criteria 1 and 2.
fn random_workload() -> (Vec<MonotoneRun>, Duration) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances: Vec<(AccessibilityMatrix, usize, u64)> = (0..200)
        .map(|r| {
            let n = rng.gen_range(5..=60);
            let k = rng.gen_range(1..=8.min(n));
            (uniform_matrix(n, &mut rng), k, r as u64)
        })
        .collect();
    let start = Instant::now();
    let runs = instances
        .iter()
        .map(|(a, k, seed)| match k_access(a, &KAccessConfig::new(*k, *seed)) {
            Ok(res) => MonotoneRun {
                violations: res.g_trace.windows(2).filter(|w| w[1] < w[0]).count(),
                iterations: res.iterations,
                converged: res.iterations < DEFAULT_MAX_ITERATIONS && res.objective() == objective(a, &res.assignment),
            },
            Err(_) => MonotoneRun {
                violations: 0,
                iterations: DEFAULT_MAX_ITERATIONS,
                converged: false,
            },
        })
        .collect();
    (runs, start.elapsed())
}

#[test]
fn criterion_1_objective_monotonicity() {
    let (runs, elapsed) = random_workload();
    let violations: usize = runs.iter().map(|r| r.violations).sum();
    let pass = runs.len() == 200 && violations == 0 && elapsed < Duration::from_secs(10);
    report(
        "1",
        "gTrace non-decreasing on 200 random matrices",
        pass,
        format!("violations {violations} (need 0), runtime {} (need < 10 s)", secs(elapsed)),
    );
    assert!(pass);
}

#[test]
fn criterion_2_termination() {
    let (runs, _) = random_workload();
    let terminated = runs.iter().filter(|r| r.converged).count();
    let max_iterations = runs.iter().map(|r| r.iterations).max().unwrap();
    let pass = terminated == runs.len();
    report(
        "2",
        "all 200 runs terminate before the iteration cap",
        pass,
        format!(
            "terminated {terminated}/{} (cap {DEFAULT_MAX_ITERATIONS}), max observed iterations {max_iterations}",
            runs.len()
        ),
    );
    assert!(pass);
}

/// Exhaustive optimum of G for k = 2: every sample takes the better of the
/// two centroids.
fn optimum_k2(a: &AccessibilityMatrix) -> f64 {
    let n = a.n();
    let mut best = f64::NEG_INFINITY;
    for c1 in 0..n {
        for c2 in c1 + 1..n {
            let g = (0..n)
                .map(|i| a.get(c1, i).max(a.get(c2, i)))
                .fold(f64::INFINITY, f64::min);
            best = best.max(g);
        }
    }
    best
}

#[test]
fn criterion_3_small_instance_optimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances: Vec<(AccessibilityMatrix, u64)> = (0..100)
        .map(|r| {
            let n = rng.gen_range(5..=8);
            (uniform_matrix(n, &mut rng), 1000 * r as u64)
        })
        .collect();
    let start = Instant::now();
    let ratios: Vec<f64> = instances
        .iter()
        .map(|(a, seed)| {
            let res = k_access_best_of(a, 2, *seed, 10).unwrap();
            objective(a, &res.assignment) / optimum_k2(a)
        })
        .collect();
    let elapsed = start.elapsed();
    let optimal = ratios.iter().filter(|&&r| r >= 1.0 - 1e-12).count();
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = optimal >= 80 && worst >= 0.95 && elapsed < Duration::from_secs(60);
    report(
        "3",
        "best-of-10 K-Access vs exhaustive optimum (n ≤ 8, k = 2)",
        pass,
        format!(
            "optimal on {optimal}/100 (need ≥ 80), worst ratio {worst:.4} (need ≥ 0.95), runtime {} (need < 60 s)",
            secs(elapsed)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_planted_recovery() {
    let cases: Vec<(usize, u64)> = (2..=6).flat_map(|k| (0..50).map(move |s| (k, s))).collect();
    let aris: Vec<f64> = cases
        .par_iter()
        .map(|&(k_star, seed)| {
            let data = generate_planted(&PlantedSpec::new(60, k_star, seed)).unwrap();
            let res = k_access(&data.matrix, &KAccessConfig::new(k_star, seed)).unwrap();
            adjusted_rand(&res.labels(), &data.labels)
        })
        .collect();
    let good = aris.iter().filter(|&&a| a >= 0.9).count();
    let min = aris.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = good * 10 >= aris.len() * 9;
    report(
        "4",
        "planted recovery ARI ≥ 0.9 (kStar 2..6, 50 seeds each, n = 60)",
        pass,
        format!("{good}/{} runs (need ≥ 90%), minimum ARI {min:.3}", aris.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_5_model_selection() {
    let best: Vec<Option<usize>> = (0..20u64)
        .into_par_iter()
        .map(|seed| {
            let data = generate_planted(&PlantedSpec::new(100, 5, seed)).unwrap();
            sweep_k(&data.matrix, 1, 10, 1.0, DEFAULT_SEEDS_PER_K, seed).unwrap().best_k
        })
        .collect();
    let hits = best.iter().filter(|k| matches!(k, Some(4..=6))).count();
    let pass = hits >= 18;
    report(
        "5",
        "sweep_k argmax in {4, 5, 6} on kStar = 5 data (n = 100, k 1..10)",
        pass,
        format!("{hits}/20 seeds (need ≥ 18), argmax per seed {best:?}"),
    );
    assert!(pass);
}

fn hand_clustering(c_index: Vec<usize>, assignment: Vec<usize>) -> ClusteringResult {
    ClusteringResult {
        k: c_index.len(),
        seed: 0,
        c_index,
        assignment,
        g_trace: vec![1.0],
        iterations: 1,
    }
}

#[test]
fn criterion_6_singleton_penalty() {
    // With every entry equal to 1 all log terms vanish for any partition,
    // so only the singleton count can move the index.
    let ones = AccessibilityMatrix::from_fn(5, 1e-8, |_, _| 1.0).unwrap();
    let without = hand_clustering(vec![0, 2], vec![0, 0, 2, 2, 2]);
    let with = hand_clustering(vec![0, 2, 4], vec![0, 0, 2, 2, 4]);
    let mut worst = 0.0f64;
    for alpha in [0.25, 1.0, 2.5] {
        let i0 = quality_index(&ones, &without, alpha).unwrap();
        let i1 = quality_index(&ones, &with, alpha).unwrap();
        assert_eq!((i0.num_singletons(), i1.num_singletons()), (0, 1));
        worst = worst.max((i1.index - i0.index + alpha).abs());
    }

    // On a general matrix the index must split as
    // mean ln intra − mean ln inter − alpha·|Ω|, recomputed here by hand.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = uniform_matrix(9, &mut rng);
    let res = hand_clustering(vec![0, 4, 8], vec![0, 0, 0, 0, 4, 4, 4, 4, 8]);
    let clusters = [vec![0, 1, 2, 3], vec![4, 5, 6, 7], vec![8]];
    let k = clusters.len();
    let intra: f64 = (0..k)
        .map(|i| clusters[i].iter().map(|&j| a.get(res.c_index[i], j)).fold(f64::INFINITY, f64::min).ln())
        .sum::<f64>()
        / k as f64;
    let inter: f64 = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| {
            if i == j {
                return 0.0;
            }
            let m = &clusters[i];
            (m.iter().map(|&l| a.get(l, res.c_index[j])).sum::<f64>() / m.len() as f64).ln()
        })
        .sum::<f64>()
        / (k * k) as f64;
    let mut decomposition = 0.0f64;
    for alpha in [0.0, 1.0, 3.0] {
        let q = quality_index(&a, &res, alpha).unwrap();
        decomposition = decomposition.max((q.index - (intra - inter - alpha)).abs());
    }

    let pass = worst <= 1e-9 && decomposition <= 1e-9;
    report(
        "6",
        "one extra singleton changes I by exactly −alpha",
        pass,
        format!("max |ΔI + alpha| {worst:.3e} (need ≤ 1e-9), decomposition error {decomposition:.3e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_coverage_dominance() {
    let outcomes: Vec<(bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let data = generate_planted(&PlantedSpec::new(60, 5, seed)).unwrap();
            let res = k_access(&data.matrix, &KAccessConfig::new(5, seed)).unwrap();
            let centroid = InitialStateSet::new("centroid", res.c_index.clone());
            let random = random_init_set(60, 5, restart_seed(seed, 7919)).unwrap();
            let c = coverage_report(&data.matrix, &centroid, DEFAULT_T0).unwrap();
            let r = coverage_report(&data.matrix, &random, DEFAULT_T0).unwrap();
            (c.coverage >= r.coverage, c.overlap_ratio < r.overlap_ratio)
        })
        .collect();
    let covers = outcomes.iter().filter(|o| o.0).count();
    let less_overlap = outcomes.iter().filter(|o| o.1).count();
    let pass = covers >= 40 && less_overlap >= 35;
    report(
        "7",
        "centroid coverage vs random equal-size sets (t0 = 3, 50 pairs)",
        pass,
        format!("coverage ≥ random in {covers}/50 (need ≥ 40), strictly lower overlap in {less_overlap}/50 (need ≥ 35)"),
    );
    assert!(pass);
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) as f64 / 2.0
    } else {
        v[m] as f64
    }
}

fn benchmark_pairs() -> Vec<ArmComparison> {
    (0..20u64)
        .into_par_iter()
        .map(|seed| benchmark_pair(seed).unwrap())
        .collect()
}

#[test]
fn criterion_8_data_efficiency() {
    let pairs = benchmark_pairs();
    let centroid: Vec<usize> = pairs.iter().map(ArmComparison::centroid_episodes).collect();
    let random: Vec<usize> = pairs.iter().map(ArmComparison::random_episodes).collect();
    let (mc, mr) = (median(centroid.clone()), median(random.clone()));
    let ratio = mc / mr;
    let pass = ratio <= 0.75;
    report(
        "8",
        "median episodes to 90% success, centroid vs random init (20 seed pairs)",
        pass,
        format!(
            "centroid median {mc}, random median {mr}, ratio {ratio:.3} (need ≤ 0.75); misses count as budget + 1 = {}",
            pairs[0].budget + 1
        ),
    );
    assert!(pass);
}

#[test]
fn supplement_8b_pairwise_data_efficiency() {
    let pairs = benchmark_pairs();
    let faster = pairs
        .iter()
        .filter(|p| p.centroid_episodes() < p.random_episodes())
        .count();
    let pass = faster >= 16;
    report(
        "8b",
        "supplementary to 8: centroid init reaches 90% in fewer episodes, per seed pair",
        pass,
        format!("{faster}/20 pairs (need ≥ 16)"),
    );
    assert!(pass);
}

const PIPELINE_CONFIG: &str = "\
source = \"pose\"
seed = 7
breakpoints = 800
count = 20000
max-states = 200
k-min = 1
k-max = 20
";

fn run_pipeline(config: &Path, output: &Path) -> Duration {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_kaccess"))
        .args(["pipeline", "--config"])
        .arg(config)
        .arg("--output")
        .arg(output)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    start.elapsed()
}

#[test]
fn criterion_9_pipeline_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("pipeline.toml");
    std::fs::write(&config, PIPELINE_CONFIG).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = run_pipeline(&config, &a);
    let second = run_pipeline(&config, &b);

    let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let differing: Vec<_> = names
        .iter()
        .filter(|n| std::fs::read(a.join(n)).ok() != std::fs::read(b.join(n)).ok())
        .collect();
    let same_listing = std::fs::read_dir(&b).unwrap().count() == names.len();
    let samples = io::read_matrix(&a.join("matrix.csv")).unwrap().n();
    let slowest = first.max(second);
    let pass = differing.is_empty() && same_listing && samples == 200 && slowest < Duration::from_secs(120);
    report(
        "9",
        "two pipeline runs are byte-identical; n = 200 finishes in < 2 min",
        pass,
        format!(
            "{} files, differing {differing:?}, samples {samples}, slowest run {}",
            names.len(),
            secs(slowest)
        ),
    );
    assert!(pass);
}
