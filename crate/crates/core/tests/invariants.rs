use exmp_core::meanfield::{simulate_finite, simulate_limit, InitialState, RateField};
use exmp_core::projection::{occupancy, project_points, transition_counts, EmpiricalSemigroup};
use exmp_core::semigroup::{build_minimal_semigroup, check_semigroup, sample_inhomogeneous_chain};
use exmp_core::{EnsemblePath, FlipEvent, SimplexPath, SimplexPoint};
use proptest::prelude::*;

fn point_strategy(k: usize) -> impl Strategy<Value = SimplexPoint> {
    prop::collection::vec(0.0f64..1.0, k).prop_map(|w| {
        let w: Vec<f64> = w.iter().map(|x| x + 0.02).collect();
        let s: f64 = w.iter().sum();
        SimplexPoint::new(w.iter().map(|x| x / s).collect()).unwrap()
    })
}

fn path_strategy() -> impl Strategy<Value = SimplexPath> {
    (2usize..=3)
        .prop_flat_map(|k| prop::collection::vec(point_strategy(k), 2..5))
        .prop_map(|pts| {
            let m = pts.len() - 1;
            let knots: Vec<(f64, SimplexPoint)> = pts
                .into_iter()
                .enumerate()
                .map(|(i, p)| (i as f64 / m as f64, p))
                .collect();
            SimplexPath::piecewise_linear(&knots).unwrap()
        })
}

fn permuted(e: &EnsemblePath, perm: &[usize]) -> EnsemblePath {
    let mut initial = vec![0; e.n()];
    for (site, &c) in e.initial().iter().enumerate() {
        initial[perm[site]] = c;
    }
    let events = e
        .events()
        .iter()
        .map(|ev| FlipEvent {
            site: perm[ev.site],
            ..*ev
        })
        .collect();
    EnsemblePath::from_unsorted(e.k(), e.horizon(), e.seed(), initial, events).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constructed_tables_pass_their_own_check(path in path_strategy(), steps in 1usize..6) {
        let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let tab = build_minimal_semigroup(&path, &grid).unwrap();
        let report = check_semigroup(&tab, &path, 1e-6).unwrap();
        prop_assert!(report.passed, "{:?}", report.failures());
        prop_assert!((report.total_transfer - report.path_variation).abs() <= 1e-6);
    }

    #[test]
    fn refining_the_grid_keeps_coarse_factors(path in path_strategy(), steps in 1usize..4) {
        let coarse: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let fine: Vec<f64> = (0..=2 * steps).map(|i| i as f64 / (2 * steps) as f64).collect();
        let a = build_minimal_semigroup(&path, &coarse).unwrap();
        let b = build_minimal_semigroup(&path, &fine).unwrap();
        for g in 0..steps {
            let q = b.q(2 * g, 2 * g + 2).unwrap();
            prop_assert!(q.max_abs_diff(&a.factors()[g]) <= 1e-6);
            prop_assert!((b.transfer()[2 * g] + b.transfer()[2 * g + 1] - a.transfer()[g]).abs() <= 1e-9);
        }
    }

    #[test]
    fn site_relabeling_leaves_statistics_unchanged(seed in any::<u64>(), shift in 1usize..50) {
        let field = RateField::constant(3, &[0.0, 1.0, 0.5, 0.3, 0.0, 1.2, 0.7, 0.2, 0.0]).unwrap();
        let y0 = SimplexPoint::new(vec![0.5, 0.3, 0.2]).unwrap();
        let e = simulate_limit(&field, 60, &y0, 1.0, 1e-9, seed).unwrap();
        let perm: Vec<usize> = (0..60).map(|i| (i * 7 + shift) % 60).collect();
        let p = permuted(&e, &perm);
        let times = [0.0, 0.25, 0.5, 1.0];
        prop_assert_eq!(project_points(&e, &times).unwrap(), project_points(&p, &times).unwrap());
        prop_assert_eq!(
            transition_counts(&e, 0.2, 0.9).unwrap().to_matrix(),
            transition_counts(&p, 0.2, 0.9).unwrap().to_matrix()
        );
    }

    #[test]
    fn counts_carry_occupancy_exactly(seed in any::<u64>(), n in 1usize..300) {
        let field = RateField::constant(2, &[0.0, 2.0, 1.0, 0.0]).unwrap();
        let y0 = SimplexPoint::new(vec![0.9, 0.1]).unwrap();
        let e = simulate_finite(&field, n, &InitialState::Iid(y0), 2.0, seed).unwrap();
        let grid = [0.0, 0.3, 0.31, 1.0, 2.0];
        let est = EmpiricalSemigroup::estimate(&e, &grid).unwrap();
        prop_assert!(est.marginals_consistent());
        let occ = occupancy(&e, &grid).unwrap();
        for (g, c) in est.counts.iter().enumerate() {
            prop_assert_eq!(&c.later_occupancy(), &occ[g + 1]);
        }
    }
}

/// Sites of an exchangeable system are interchangeable in law: over many
/// seeds, `(site 0, site 1)` colors are as likely to read `(1, 0)` as `(0, 1)`.
#[test]
fn pair_law_is_symmetric_across_sites() {
    let field = RateField::constant(2, &[0.0, 1.0, 0.5, 0.0]).unwrap();
    let y0 = SimplexPoint::new(vec![0.6, 0.4]).unwrap();
    let runs = 4000u64;
    let (mut ab, mut ba) = (0i64, 0i64);
    for seed in 0..runs {
        let e = simulate_finite(&field, 4, &InitialState::Iid(y0.clone()), 0.7, seed).unwrap();
        let c = e.colors_at(0.7).unwrap();
        match (c[0], c[1]) {
            (1, 0) => ab += 1,
            (0, 1) => ba += 1,
            _ => {}
        }
    }
    let sd = ((ab + ba) as f64).sqrt();
    assert!(((ab - ba) as f64).abs() <= 4.0 * sd, "{ab} vs {ba}");
}

#[test]
fn sampled_chain_matches_table_marginals() {
    let path = SimplexPath::linear(
        SimplexPoint::new(vec![0.7, 0.2, 0.1]).unwrap(),
        SimplexPoint::new(vec![0.1, 0.3, 0.6]).unwrap(),
        1.0,
    )
    .unwrap();
    let grid = [0.0, 0.5, 1.0];
    let tab = build_minimal_semigroup(&path, &grid).unwrap();
    let e = sample_inhomogeneous_chain(&tab, &path.eval(0.0).unwrap(), 20_000, 5).unwrap();
    for (t, y) in grid.iter().zip(project_points(&e, &grid).unwrap()) {
        let want = path.eval(*t).unwrap();
        for i in 0..3 {
            assert!((y.get(i) - want.get(i)).abs() < 0.02, "t = {t}");
        }
    }
}
