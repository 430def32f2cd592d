//! The property suite behind `exmp verify-all`.
//!
//! Each criterion regenerates its own data from the master seed and returns
//! a pass flag with a JSON payload of the measured quantities. Payloads hold
//! no timings or thread counts, so a suite run is reproducible byte for byte.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use serde_json::{json, Value};

use crate::discrete::{
    simulate_discrete, verify_discrete, FixedLaw, FnLaw, IdentityLaw, MixtureComponent, MixtureLaw,
};
use crate::ensemble::EnsemblePath;
use crate::error::Result;
use crate::fixtures::{
    feller_degenerate_pair, path_corpus, poisson_recolor_pair, poisson_times,
    singular_clock_process, threshold_process, MonotoneClock,
};
use crate::meanfield::{
    reed_frost_field, simulate_finite, simulate_finite_replicates, simulate_limit, solve_ode_at,
    InitialState, RateField, ReedFrostParams,
};
use crate::path::path_total_variation;
use crate::projection::{project_points, EmpiricalSemigroup, TransitionCounts};
use crate::rng::{derive_seed, stream};
use crate::semigroup::{
    build_minimal_semigroup, check_semigroup, feller_flow_check, integrate_opened_segment,
    jump_transport_matrix, sample_inhomogeneous_chain,
};
use crate::simplex::{l1_raw, matrix_exp, row_times, tv_distance, SimplexPoint, StochasticMatrix};

/// `(1 − e^{−2})/2`: color-1 fraction at `t = 1` for unit rates both ways from `(1, 0)`.
pub const TWO_STATE_AT_ONE: f64 = 0.432_332_358_381_693_65;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Fewer sites and replicates; thresholds are unchanged.
    pub quick: bool,
}

impl SuiteOptions {
    pub fn sites(&self) -> usize {
        if self.quick {
            2_500
        } else {
            10_000
        }
    }

    fn replicates(&self) -> usize {
        if self.quick {
            20
        } else {
            100
        }
    }

    fn seed_for(&self, id: u8) -> u64 {
        derive_seed(self.seed, 1000 + id as u64)
    }
}

pub const CRITERIA: [(u8, &str); 10] = [
    (1, "fluid-limit"),
    (2, "semigroup-construction"),
    (3, "jump-transport-oracle"),
    (4, "de-finetti-closure"),
    (5, "non-uniqueness-witness"),
    (6, "non-feller-gap"),
    (7, "singular-clock"),
    (8, "constant-rate-flow"),
    (9, "empirical-algebra"),
    (10, "determinism"),
];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub quick: bool,
    pub passed: bool,
    pub criteria: Vec<CriterionOutcome>,
}

/// Runs one criterion. Library errors become a failed outcome carrying the message.
pub fn run_criterion(id: u8, opts: &SuiteOptions) -> CriterionOutcome {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| *n)
        .unwrap_or("unknown");
    let result = match id {
        1 => fluid_limit(opts),
        2 => construction(opts),
        3 => transport_oracle(opts),
        4 => de_finetti(opts),
        5 => non_uniqueness(opts),
        6 => non_feller(opts),
        7 => singular_clock(opts),
        8 => constant_flow(opts),
        9 => empirical_algebra(opts),
        10 => determinism(opts),
        _ => Ok((false, json!({"error": format!("no criterion {id}")}))),
    };
    let (passed, details) = result.unwrap_or_else(|e| (false, json!({"error": e.to_string()})));
    CriterionOutcome {
        id,
        name,
        passed,
        details,
    }
}

pub fn run_suite(opts: &SuiteOptions) -> SuiteReport {
    let criteria: Vec<CriterionOutcome> = CRITERIA
        .iter()
        .map(|(id, _)| run_criterion(*id, opts))
        .collect();
    SuiteReport {
        seed: opts.seed,
        quick: opts.quick,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

type Outcome = Result<(bool, Value)>;

fn pt(w: &[f64]) -> Result<SimplexPoint> {
    SimplexPoint::new(w.to_vec())
}

fn two_state_field() -> Result<RateField> {
    RateField::constant(2, &[0.0, 1.0, 1.0, 0.0])
}

fn fluid_limit(opts: &SuiteOptions) -> Outcome {
    let field = two_state_field()?;
    let y0 = pt(&[1.0, 0.0])?;
    let grid: Vec<f64> = (1..=20).map(|j| j as f64 / 20.0).collect();
    let ode = solve_ode_at(&field, &y0, 1.0, 1e-12, &grid)?;
    let ode_at_one = ode.eval(1.0)?.get(1);
    let ode_error = (ode_at_one - TWO_STATE_AT_ONE).abs();

    let base = opts.seed_for(1);
    let seeds: Vec<u64> = (0..opts.replicates() as u64)
        .map(|r| derive_seed(base, r))
        .collect();
    let runs =
        simulate_finite_replicates(&field, opts.sites(), &InitialState::Iid(y0), 1.0, &seeds)?;
    let want = grid
        .iter()
        .map(|&t| Ok(ode.eval(t)?.get(1)))
        .collect::<Result<Vec<f64>>>()?;
    let deviations = runs
        .iter()
        .map(|e| {
            let ys = project_points(e, &grid)?;
            Ok(ys
                .iter()
                .zip(&want)
                .map(|(y, w)| (y.get(1) - w).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let within = deviations.iter().filter(|&&d| d <= 0.05).count();
    let needed = (opts.replicates() * 95).div_ceil(100);
    let passed = within >= needed && ode_error <= 1e-8;
    Ok((
        passed,
        json!({
            "sites": opts.sites(),
            "runs": runs.len(),
            "runs_within_0.05": within,
            "runs_needed": needed,
            "worst_deviation": deviations.iter().copied().fold(0.0, f64::max),
            "ode_at_1": ode_at_one,
            "ode_error": ode_error,
        }),
    ))
}

fn construction(_opts: &SuiteOptions) -> Outcome {
    let mut passed = true;
    let mut rows = Vec::new();
    for entry in path_corpus()? {
        let tab = build_minimal_semigroup(&entry.path, &entry.grid)?;
        let rep = check_semigroup(&tab, &entry.path, 1e-6)?;
        let ok = rep.passed && rep.compatibility_residual <= 1e-6 && rep.minimality_gap <= 1e-6;
        passed &= ok;
        rows.push(json!({
            "path": entry.name,
            "steps": tab.factors().len(),
            "compatibility_residual": rep.compatibility_residual,
            "minimality_gap": rep.minimality_gap,
            "cocycle_residual": rep.cocycle_residual,
            "subadditivity_violations": rep.subadditivity_violations.len(),
            "path_variation": rep.path_variation,
            "passed": ok,
        }));
    }
    Ok((passed, json!({"tol": 1e-6, "paths": rows})))
}

fn dirichlet(k: usize, rng: &mut impl Rng) -> Result<SimplexPoint> {
    let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = raw.iter().sum();
    SimplexPoint::new(raw.iter().map(|x| x / s).collect())
}

fn transport_oracle(opts: &SuiteOptions) -> Outcome {
    let seed = opts.seed_for(3);
    let mut rows = Vec::new();
    let mut passed = true;
    for k in [2usize, 3] {
        let mut rng = stream(seed, k as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let (a, b) = (dirichlet(k, &mut rng)?, dirichlet(k, &mut rng)?);
            let closed = jump_transport_matrix(&a, &b)?;
            let numeric = integrate_opened_segment(&a, &b, 1e-11)?;
            worst = worst.max(closed.max_abs_diff(&numeric));
        }
        passed &= worst <= 1e-6;
        rows.push(json!({"k": k, "pairs": 100, "worst_entry_gap": worst}));
    }
    Ok((passed, json!({"tol": 1e-6, "simplices": rows})))
}

fn de_finetti(opts: &SuiteOptions) -> Outcome {
    let n = opts.sites();
    let tol = 5.0 / (n as f64).sqrt();
    let seed = opts.seed_for(4);
    let mut passed = true;
    let mut rows = Vec::new();
    for (idx, entry) in path_corpus()?.into_iter().enumerate() {
        let tab = build_minimal_semigroup(&entry.path, &entry.grid)?;
        let y0 = entry.path.eval(entry.grid[0])?;
        let e = sample_inhomogeneous_chain(&tab, &y0, n, derive_seed(seed, idx as u64))?;
        let est = EmpiricalSemigroup::estimate(&e, &entry.grid)?;
        let mut factor_gap: f64 = 0.0;
        for (g, (q, counts)) in tab.factors().iter().zip(&est.counts).enumerate() {
            for i in (0..tab.k()).filter(|&i| counts.row_total(i) > 0) {
                for j in 0..tab.k() {
                    factor_gap = factor_gap.max((est.factors[g].get(i, j) - q.get(i, j)).abs());
                }
            }
        }
        let mut path_gap: f64 = 0.0;
        for (m, &t) in est.marginals.iter().zip(&entry.grid) {
            path_gap = path_gap.max(l1_raw(m.weights(), entry.path.eval(t)?.weights()));
        }
        let ok = factor_gap <= tol && path_gap <= tol;
        passed &= ok;
        rows.push(json!({
            "path": entry.name,
            "factor_gap": factor_gap,
            "projection_l1_gap": path_gap,
            "passed": ok,
        }));
    }
    Ok((passed, json!({"sites": n, "tol": tol, "paths": rows})))
}

/// Counts of `(color before t, color at t)` as a matrix, with the mass moved.
fn jump_matrix(e: &EnsemblePath, t: f64) -> Result<(StochasticMatrix, f64, SimplexPoint)> {
    let before = e.colors_before(t)?;
    let after = e.colors_at(t)?;
    let counts = TransitionCounts::between(&before, &after, e.k())?;
    let post = SimplexPoint::from_counts(&counts.later_occupancy())?;
    Ok((
        counts.to_matrix(),
        counts.changed() as f64 / e.n() as f64,
        post,
    ))
}

fn non_uniqueness(opts: &SuiteOptions) -> Outcome {
    let seed = opts.seed_for(5);
    let horizon = 10.0;
    let (x, z) = poisson_recolor_pair(opts.sites(), horizon, seed)?;
    let jumps = poisson_times(seed, horizon);
    let mut rows = Vec::new();
    let mut projections_agree = true;
    let mut transfers_ok = true;
    let mut row1_witness: f64 = 0.0;
    let mut matrix_gap_min = f64::INFINITY;
    for &t in &jumps {
        let (qx, tx, yx) = jump_matrix(&x, t)?;
        let (qz, tz, yz) = jump_matrix(&z, t)?;
        let proj_gap = tv_distance(&yx, &yz)?;
        let row1 = (0..2)
            .map(|j| (qx.get(1, j) - qz.get(1, j)).abs())
            .fold(0.0, f64::max);
        let whole = qx.max_abs_diff(&qz);
        projections_agree &= proj_gap <= 0.05;
        transfers_ok &= (tx - 1.0 / 3.0).abs() <= 0.05 && (tz - 5.0 / 9.0).abs() <= 0.05;
        row1_witness = row1_witness.max(row1);
        matrix_gap_min = matrix_gap_min.min(whole);
        rows.push(json!({
            "t": t,
            "projection_gap": proj_gap,
            "qhat_x": qx,
            "qhat_z": qz,
            "row1_gap": row1,
            "matrix_gap": whole,
            "transfer_x": tx,
            "transfer_z": tz,
        }));
    }
    let passed = jumps.len() >= 2
        && projections_agree
        && transfers_ok
        && row1_witness >= 0.2
        && matrix_gap_min >= 0.2;
    Ok((
        passed,
        json!({
            "sites": opts.sites(),
            "jumps": rows,
            "row1_witness": row1_witness,
            "min_matrix_gap": matrix_gap_min,
        }),
    ))
}

fn non_feller(opts: &SuiteOptions) -> Outcome {
    let seed = opts.seed_for(6);
    let low = threshold_process(0.499, opts.sites(), 1.0, derive_seed(seed, 0))?;
    let high = threshold_process(0.501, opts.sites(), 1.0, derive_seed(seed, 1))?;
    let y_low = project_points(&low, &[1.0])?[0].get(1);
    let y_high = project_points(&high, &[1.0])?[0].get(1);
    let gap = (y_high - y_low).abs();
    Ok((
        gap >= 0.55,
        json!({"sites": opts.sites(), "y_0.499": y_low, "y_0.501": y_high, "gap": gap, "threshold": 0.55}),
    ))
}

fn singular_clock(opts: &SuiteOptions) -> Outcome {
    let e = singular_clock_process(&MonotoneClock::Cantor, opts.sites(), opts.seed_for(7))?;
    let times = [1.0 / 9.0, 1.0 / 3.0, 0.5, 2.0 / 3.0];
    let want = [0.25, 0.5, 0.5, 0.5];
    let ys = project_points(&e, &times)?;
    let gaps: Vec<f64> = ys
        .iter()
        .zip(want)
        .map(|(y, w)| (y.get(1) - w).abs())
        .collect();
    let limit = MonotoneClock::Cantor.limit_path(3usize.pow(8))?;
    let tv = path_total_variation(&limit, 0.0, 1.0)?;
    let passed = gaps.iter().all(|&g| g <= 0.05) && (tv - 1.0).abs() <= 1e-6;
    Ok((
        passed,
        json!({
            "sites": opts.sites(),
            "times": times,
            "projection": ys.iter().map(|y| y.get(1)).collect::<Vec<_>>(),
            "gaps": gaps,
            "limit_path_variation": tv,
        }),
    ))
}

fn constant_flow(_opts: &SuiteOptions) -> Outcome {
    let field = two_state_field()?;
    let grid: Vec<f64> = (0..=20).map(|j| j as f64 / 20.0).collect();
    let y0 = pt(&[1.0, 0.0])?;
    let rep = feller_flow_check(&field, 1.0, &grid, Some(&y0))?;
    let mut closed_form: f64 = 0.0;
    for i in 0..grid.len() {
        for j in i..grid.len() {
            let q = rep.table.q(i, j)?;
            let gap = grid[j] - grid[i];
            closed_form = closed_form.max((q.get(0, 0) - (1.0 + (-2.0 * gap).exp()) / 2.0).abs());
        }
    }
    // |exp(tR) − I| ≤ e^{t‖R‖} − 1 with ‖R‖ = 2 for unit rates
    let bounded = rep.continuity.iter().all(|&(t, d)| d <= (2.0 * t).exp_m1());
    let passed =
        rep.max_residual() <= 1e-9 && closed_form <= 1e-9 && rep.continuity_monotone && bounded;
    Ok((
        passed,
        json!({
            "cocycle_residual": rep.cocycle_residual,
            "stationarity_residual": rep.stationarity_residual,
            "ode_residual": rep.ode_residual,
            "closed_form_residual": closed_form,
            "continuity": rep.continuity,
            "continuity_monotone": rep.continuity_monotone,
        }),
    ))
}

/// Integer identity `Σᵢ C(i, j) = N_j(t)` and `Σⱼ C(i, j) = Nᵢ(s)` on a grid,
/// plus the floating residual of `Y_s·Q̂ − Y_t`.
fn ensemble_algebra(e: &EnsemblePath, grid: &[f64]) -> Result<(bool, f64)> {
    let est = EmpiricalSemigroup::estimate(e, grid)?;
    let mut float_gap: f64 = 0.0;
    for (g, q) in est.factors.iter().enumerate() {
        let pushed = row_times(est.marginals[g].weights(), q.entries(), e.k());
        float_gap = float_gap.max(l1_raw(&pushed, est.marginals[g + 1].weights()));
    }
    Ok((est.marginals_consistent(), float_gap))
}

fn empirical_algebra(opts: &SuiteOptions) -> Outcome {
    let seed = opts.seed_for(9);
    let n = opts.sites();
    let mut ensembles: Vec<(String, EnsemblePath)> = Vec::new();
    let rf = reed_frost_field(ReedFrostParams::new(3.0, 1.0)?)?;
    let sir0 = pt(&[0.95, 0.05, 0.0])?;
    ensembles.push((
        "finite-reed-frost".into(),
        simulate_finite(
            &rf,
            n,
            &InitialState::Iid(sir0.clone()),
            4.0,
            derive_seed(seed, 0),
        )?,
    ));
    ensembles.push((
        "limit-reed-frost".into(),
        simulate_limit(&rf, n, &sir0, 4.0, 1e-9, derive_seed(seed, 1))?,
    ));
    for (idx, entry) in path_corpus()?.into_iter().enumerate() {
        let tab = build_minimal_semigroup(&entry.path, &entry.grid)?;
        let y0 = entry.path.eval(0.0)?;
        ensembles.push((
            format!("chain-{}", entry.name),
            sample_inhomogeneous_chain(&tab, &y0, n, derive_seed(seed, 10 + idx as u64))?,
        ));
    }
    let (x, z) = poisson_recolor_pair(n, 5.0, derive_seed(seed, 2))?;
    ensembles.push(("recolor-x".into(), x));
    ensembles.push(("recolor-z".into(), z));
    let (a, b) = feller_degenerate_pair(0.25, n, 5.0, derive_seed(seed, 3))?;
    ensembles.push(("feller-a".into(), a));
    ensembles.push(("feller-b".into(), b));
    ensembles.push((
        "threshold".into(),
        threshold_process(0.3, n, 3.0, derive_seed(seed, 4))?,
    ));
    ensembles.push((
        "cantor-clock".into(),
        singular_clock_process(&MonotoneClock::Cantor, n, derive_seed(seed, 5))?,
    ));

    let mut passed = true;
    let mut rows = Vec::new();
    for (name, e) in &ensembles {
        let mut grid: Vec<f64> = (0..=16).map(|j| e.horizon() * j as f64 / 16.0).collect();
        grid.extend(e.event_times().into_iter().step_by(97));
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let (exact, float_gap) = ensemble_algebra(e, &grid)?;
        passed &= exact;
        rows.push(json!({"ensemble": name, "grid_points": grid.len(), "exact": exact, "float_l1_gap": float_gap}));
    }

    let mix = MixtureLaw::new(vec![
        MixtureComponent {
            weight: 1.0,
            matrix: StochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]])?,
        },
        MixtureComponent {
            weight: 1.0,
            matrix: StochasticMatrix::from_rows(&[vec![1.0, 0.0], vec![0.3, 0.7]])?,
        },
    ])?;
    // the leader gives away a quarter of its mass, split evenly
    let tilted = FnLaw::new(3, "tilted", |y: &[f64], _rng| {
        let lead = (0..3).fold(0, |b, i| if y[i] > y[b] { i } else { b });
        let mut q = crate::simplex::identity(3);
        for j in 0..3 {
            q[lead * 3 + j] = if j == lead { 0.75 } else { 0.125 };
        }
        q
    });
    let runs: Vec<(&str, Result<_>)> = vec![
        (
            "identity",
            simulate_discrete(
                &IdentityLaw { k: 2 },
                &pt(&[0.4, 0.6])?,
                n,
                5,
                derive_seed(seed, 20),
            ),
        ),
        (
            "fixed",
            simulate_discrete(
                &FixedLaw(StochasticMatrix::from_rows(&[
                    vec![0.5, 0.5],
                    vec![0.0, 1.0],
                ])?),
                &pt(&[1.0, 0.0])?,
                n,
                6,
                derive_seed(seed, 21),
            ),
        ),
        (
            "mixture",
            simulate_discrete(&mix, &pt(&[0.5, 0.5])?, n, 8, derive_seed(seed, 22)),
        ),
        (
            "tilted",
            simulate_discrete(&tilted, &pt(&[0.5, 0.3, 0.2])?, n, 8, derive_seed(seed, 23)),
        ),
    ];
    let mut traces = Vec::new();
    for (name, run) in runs {
        let (trace, e) = run?;
        let rep = verify_discrete(&trace, &e, None)?;
        let text = serde_json::to_string(&trace)?;
        let reread: crate::discrete::DiscreteTrace = serde_json::from_str(&text)?;
        let round_trip = verify_discrete(&reread, &e, None)?.recursion_residual;
        let grid: Vec<f64> = (0..=trace.steps()).map(|m| m as f64).collect();
        let (exact, _) = ensemble_algebra(&e, &grid)?;
        let ok = rep.recursion_residual == 0.0 && round_trip == 0.0 && exact;
        passed &= ok;
        traces.push(json!({
            "sampler": name,
            "recursion_residual": rep.recursion_residual,
            "after_json_round_trip": round_trip,
            "ensemble_exact": exact,
            "qhat_gap": rep.max_gap,
        }));
    }
    Ok((
        passed,
        json!({"sites": n, "ensembles": rows, "discrete": traces}),
    ))
}

/// The suite's own reproducibility: a reduced workload under one and four
/// workers must serialize identically.
fn determinism(opts: &SuiteOptions) -> Outcome {
    let work = |threads: usize| -> Result<String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::error::Error::InvalidArgument(e.to_string()))?;
        pool.install(|| {
            let seed = opts.seed_for(10);
            let mut buf = Vec::new();
            let field = two_state_field()?;
            let y0 = pt(&[0.7, 0.3])?;
            simulate_limit(&field, 2000, &y0, 1.0, 1e-9, seed)?.write_jsonl(&mut buf)?;
            let replicates = simulate_finite_replicates(
                &field,
                500,
                &InitialState::Iid(y0),
                1.0,
                &[seed, seed + 1],
            )?;
            for e in replicates {
                e.write_jsonl(&mut buf)?;
            }
            let corpus = path_corpus()?;
            let tab = build_minimal_semigroup(&corpus[1].path, &corpus[1].grid)?;
            tab.write_json(&mut buf)?;
            sample_inhomogeneous_chain(&tab, &corpus[1].path.eval(0.0)?, 2000, seed)?
                .write_jsonl(&mut buf)?;
            let (x, z) = poisson_recolor_pair(2000, 3.0, seed)?;
            x.write_jsonl(&mut buf)?;
            z.write_jsonl(&mut buf)?;
            let q = matrix_exp(&field.constant_generator()?, 0.25)?;
            let (trace, e) = simulate_discrete(&FixedLaw(q), &pt(&[1.0, 0.0])?, 2000, 4, seed)?;
            serde_json::to_writer(&mut buf, &trace)?;
            e.write_jsonl(&mut buf)?;
            Ok(String::from_utf8_lossy(&buf).into_owned())
        })
    };
    let one = work(1)?;
    let four = work(4)?;
    Ok((
        one == four,
        json!({"bytes": one.len(), "identical": one == four}),
    ))
}
