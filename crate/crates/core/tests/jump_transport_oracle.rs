//! The closed-form jump transport against direct integration of the
//! minimal-flux generator along the opened straight segment.

use exmp_core::semigroup::{integrate_opened_segment, jump_transport_matrix};
use exmp_core::SimplexPoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dirichlet(k: usize, rng: &mut ChaCha8Rng) -> SimplexPoint {
    let raw: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-300).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    SimplexPoint::new(raw.iter().map(|x| x / s).collect()).unwrap()
}

fn worst_gap(k: usize, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (a, b) = (dirichlet(k, &mut rng), dirichlet(k, &mut rng));
        let closed = jump_transport_matrix(&a, &b).unwrap();
        let numeric = integrate_opened_segment(&a, &b, 1e-11).unwrap();
        worst = worst.max(closed.max_abs_diff(&numeric));
    }
    worst
}

#[test]
fn closed_form_matches_integration_on_two_colors() {
    let gap = worst_gap(2, 100, 2024);
    assert!(gap <= 1e-6, "worst entrywise gap {gap}");
}

#[test]
fn closed_form_matches_integration_on_three_colors() {
    let gap = worst_gap(3, 100, 2025);
    assert!(gap <= 1e-6, "worst entrywise gap {gap}");
}
