use exmp_core::discrete::{simulate_discrete, FixedLaw};
use exmp_core::meanfield::{
    glauber_field, simulate_finite, solve_ode, InitialState, IsingParams, RateField,
};
use exmp_core::projection::project_points;
use exmp_core::{EnsemblePath, SimplexPath, SimplexPoint, StochasticMatrix};

fn sup_error(e: &EnsemblePath, limit: &SimplexPath, grid: &[f64]) -> f64 {
    project_points(e, grid)
        .unwrap()
        .iter()
        .zip(grid)
        .map(|(y, &t)| (y.get(1) - limit.eval(t).unwrap().get(1)).abs())
        .fold(0.0, f64::max)
}

fn mean_error(field: &RateField, y0: &SimplexPoint, n: usize, seeds: u64) -> f64 {
    let limit = solve_ode(field, y0, 1.0, 1e-10).unwrap();
    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let total: f64 = (0..seeds)
        .map(|s| {
            let e = simulate_finite(field, n, &InitialState::Iid(y0.clone()), 1.0, s).unwrap();
            sup_error(&e, &limit, &grid)
        })
        .sum();
    total / seeds as f64
}

#[test]
fn finite_glauber_approaches_its_ode() {
    let field = glauber_field(IsingParams::new(0.8, 0.2, 1.0).unwrap()).unwrap();
    let y0 = SimplexPoint::new(vec![0.7, 0.3]).unwrap();
    let small = mean_error(&field, &y0, 400, 12);
    let large = mean_error(&field, &y0, 10_000, 12);
    assert!(large < small, "{large} !< {small}");
    assert!(large <= 5.0 / 100.0, "{large}");
    // error scales like n^{-1/2}: a factor 5 in √n should buy at least 2.5
    assert!(small / large > 2.5, "ratio {}", small / large);
}

#[test]
fn discrete_chain_tracks_exact_recursion() {
    let q = StochasticMatrix::from_rows(&[vec![0.9, 0.1], vec![0.3, 0.7]]).unwrap();
    let y0 = SimplexPoint::new(vec![0.2, 0.8]).unwrap();
    for n in [1_000usize, 20_000] {
        let (trace, e) = simulate_discrete(&FixedLaw(q.clone()), &y0, n, 12, 4).unwrap();
        let times: Vec<f64> = (0..=12).map(|m| m as f64).collect();
        let worst = project_points(&e, &times)
            .unwrap()
            .iter()
            .zip(&trace.marginals)
            .map(|(y, exact)| (y.get(0) - exact[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 5.0 / (n as f64).sqrt(), "n = {n}: {worst}");
    }
}
