//! K-Access against the exhaustive oracle on small matrices.

use kaccess::access::AccessibilityMatrix;
use kaccess::cluster::k_access_best_of;
use kaccess::synthetic::{brute_force_best_g, generate_planted, PlantedSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_matrix(n: usize, rng: &mut ChaCha8Rng) -> AccessibilityMatrix {
    let entries = (0..n * n)
        .map(|p| if p / n == p % n { 1.0 } else { rng.gen_range(1e-8..=1.0) })
        .collect();
    AccessibilityMatrix::new(n, entries, 1e-8).unwrap()
}

#[test]
fn best_of_ten_is_near_optimal_on_most_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 200;
    let mut close = 0;
    for r in 0..trials {
        let n = rng.gen_range(3..=8);
        let k = rng.gen_range(1..=n.min(4));
        let a = uniform_matrix(n, &mut rng);
        let (best, _, _) = brute_force_best_g(&a, k).unwrap();
        let got = k_access_best_of(&a, k, r as u64 * 100, 10).unwrap().objective();
        assert!(got <= best + 1e-12);
        if got >= 0.95 * best {
            close += 1;
        }
    }
    println!("within 5% of optimum on {close}/{trials}");
    assert!(close * 5 >= trials * 4, "{close}/{trials}");
}

#[test]
fn planted_instances_reach_the_optimum() {
    for seed in 0..30 {
        let n = 6 + (seed as usize % 3);
        let k = 2 + (seed as usize % 2);
        let data = generate_planted(&PlantedSpec::new(n, k, seed)).unwrap();
        let (best, _, _) = brute_force_best_g(&data.matrix, k).unwrap();
        let got = k_access_best_of(&data.matrix, k, seed, 10).unwrap().objective();
        assert!((got - best).abs() < 1e-12, "seed {seed}: {got} vs {best}");
    }
}

#[test]
fn six_sample_random_matrices_usually_reach_the_global_maximum() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 100;
    let hits = (0..trials)
        .filter(|&r| {
            let a = uniform_matrix(6, &mut rng);
            let (best, _, _) = brute_force_best_g(&a, 2).unwrap();
            let got = k_access_best_of(&a, 2, r as u64, 10).unwrap().objective();
            (got - best).abs() < 1e-12
        })
        .count();
    println!("global maximum reached on {hits}/{trials}");
    assert!(hits * 2 >= trials, "{hits}/{trials}");
}
