use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use exmp_core::discrete::{
    simulate_discrete, verify_discrete, FixedLaw, IdentityLaw, MatrixLaw, MixtureLaw,
};
use exmp_core::fixtures::{
    feller_degenerate_pair, poisson_recolor_pair, singular_clock_process, threshold_process,
    MonotoneClock,
};
use exmp_core::meanfield::{
    glauber_field, reed_frost_field, simulate_finite, simulate_limit, solve_ode_at, InitialState,
    IsingParams, RateField, ReedFrostParams,
};
use exmp_core::path::write_rows_csv;
use exmp_core::projection::{classify_discontinuities, project_points, transition_counts};
use exmp_core::semigroup::{
    build_minimal_semigroup, check_semigroup, sample_inhomogeneous_chain, SemigroupTable,
};
use exmp_core::suite::{run_criterion, SuiteOptions, SuiteReport, CRITERIA};
use exmp_core::{EnsemblePath, Interp, SimplexPath, SimplexPoint, StochasticMatrix};
use serde_json::json;

use crate::args::*;
use crate::output::{print_json, Outputs};

/// A flag value the library cannot accept; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Whether the run met every check it was asked to make.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

pub fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Simulate(_) => "simulate",
        Command::Ode(_) => "ode",
        Command::Project(_) => "project",
        Command::Qhat(_) => "qhat",
        Command::Jumps(_) => "jumps",
        Command::Semigroup(SemigroupCommand::Build { .. }) => "semigroup build",
        Command::Semigroup(SemigroupCommand::Check { .. }) => "semigroup check",
        Command::Semigroup(SemigroupCommand::Sample { .. }) => "semigroup sample",
        Command::Discrete(_) => "discrete",
        Command::Fixtures(FixtureCommand::Cantor { .. }) => "fixtures cantor",
        Command::Fixtures(FixtureCommand::Threshold { .. }) => "fixtures threshold",
        Command::Fixtures(FixtureCommand::RecolorPair { .. }) => "fixtures recolor-pair",
        Command::Fixtures(FixtureCommand::FellerPair { .. }) => "fixtures feller-pair",
        Command::VerifyAll(_) => "verify-all",
    }
}

pub fn run(command: Command, out: &mut Outputs) -> Result<Status> {
    match command {
        Command::Simulate(a) => simulate(a, out),
        Command::Ode(a) => ode(a, out),
        Command::Project(a) => project(a, out),
        Command::Qhat(a) => qhat(a, out),
        Command::Jumps(a) => jumps(a, out),
        Command::Semigroup(c) => semigroup(c, out),
        Command::Discrete(a) => discrete(a, out),
        Command::Fixtures(c) => fixtures(c, out),
        Command::VerifyAll(a) => verify_all(a, out),
    }
}

fn point(w: &[f64]) -> Result<SimplexPoint> {
    SimplexPoint::new(w.to_vec()).map_err(|e| usage(format!("--y0: {e}")))
}

fn field(m: &ModelArgs, k: usize) -> Result<RateField> {
    let f = match m.model {
        ModelKind::Constant => {
            if m.rates.len() != k * k {
                return Err(usage(format!(
                    "--rates needs {} values for k = {k}, got {}",
                    k * k,
                    m.rates.len()
                )));
            }
            let mut rates = m.rates.clone();
            for i in 0..k {
                rates[i * k + i] = 0.0;
            }
            RateField::constant(k, &rates)?
        }
        ModelKind::Glauber => {
            if k != 2 {
                return Err(usage("glauber needs two colors"));
            }
            glauber_field(IsingParams::new(m.beta, m.field, m.coupling)?)?
        }
        ModelKind::ReedFrost => {
            if k != 3 {
                return Err(usage("reed-frost needs three colors"));
            }
            reed_frost_field(ReedFrostParams::new(m.beta, m.recovery)?)?
        }
    };
    Ok(f)
}

fn read_ensemble(p: &Path) -> Result<EnsemblePath> {
    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
    EnsemblePath::read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
}

fn read_path(p: &Path, interp: InterpArg) -> Result<SimplexPath> {
    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
    let interp = match interp {
        InterpArg::Step => Interp::Step,
        InterpArg::Linear => Interp::Linear,
    };
    SimplexPath::read_csv(BufReader::new(f), interp)
        .with_context(|| format!("reading {}", p.display()))
}

fn read_table(p: &Path) -> Result<SemigroupTable> {
    let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
    SemigroupTable::read_json(BufReader::new(f)).with_context(|| format!("reading {}", p.display()))
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= horizon)) {
        return Err(usage(format!("time {t} outside [0, {horizon}]")));
    }
    Ok(())
}

fn uniform(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect()
}

fn simulate(a: SimulateArgs, out: &mut Outputs) -> Result<Status> {
    let y0 = point(&a.y0)?;
    let f = field(&a.model, y0.k())?;
    out.seed(a.seed);
    let e = if a.limit {
        simulate_limit(&f, a.n, &y0, a.horizon, a.tol, a.seed)?
    } else {
        simulate_finite(&f, a.n, &InitialState::Iid(y0), a.horizon, a.seed)?
    };
    out.write(&a.out, |w| Ok(e.write_jsonl(w)?))?;
    if let Some(p) = &a.emit_plot_data {
        let times = uniform(a.horizon, 100);
        let rows: Vec<_> = times
            .iter()
            .copied()
            .zip(project_points(&e, &times)?)
            .collect();
        out.write_plot_data(p, &rows)?;
    }
    Ok(Status::Passed)
}

fn ode(a: OdeArgs, out: &mut Outputs) -> Result<Status> {
    let y0 = point(&a.y0)?;
    check_times(&a.times, a.horizon)?;
    let f = field(&a.model, y0.k())?;
    let path = solve_ode_at(&f, &y0, a.horizon, a.tol, &a.times)?;
    out.write(&a.out, |w| Ok(path.write_csv(w)?))?;
    if let Some(p) = &a.emit_plot_data {
        out.write_plot_data(p, &path.knots())?;
    }
    Ok(Status::Passed)
}

fn project(a: ProjectArgs, out: &mut Outputs) -> Result<Status> {
    let e = read_ensemble(&a.input)?;
    check_times(&a.times, e.horizon())?;
    let rows: Vec<_> = a
        .times
        .iter()
        .copied()
        .zip(project_points(&e, &a.times)?)
        .collect();
    out.write(&a.out, |w| Ok(write_rows_csv(w, e.k(), &rows)?))?;
    if let Some(p) = &a.emit_plot_data {
        out.write_plot_data(p, &rows)?;
    }
    Ok(Status::Passed)
}

fn emit(
    out: &mut Outputs,
    target: &Option<std::path::PathBuf>,
    value: &serde_json::Value,
) -> Result<()> {
    match target {
        Some(p) => out.write_json(p, value),
        None => print_json(value),
    }
}

fn qhat(a: QhatArgs, out: &mut Outputs) -> Result<Status> {
    let e = read_ensemble(&a.input)?;
    check_times(&[a.s, a.t], e.horizon())?;
    if a.s > a.t {
        return Err(usage(format!("--s {} after --t {}", a.s, a.t)));
    }
    let counts = transition_counts(&e, a.s, a.t)?;
    let q = counts.to_matrix();
    let y = SimplexPoint::from_counts(&counts.earlier_occupancy())?;
    let value = json!({
        "s": a.s,
        "t": a.t,
        "matrix": q,
        "counts": counts,
        "mass_transfer": q.mass_transfer(&y)?,
    });
    emit(out, &a.out, &value)?;
    Ok(Status::Passed)
}

fn jumps(a: JumpsArgs, out: &mut Outputs) -> Result<Status> {
    if !(a.theta > 0.0 && a.theta <= 1.0) {
        return Err(usage(format!("--theta {} outside (0, 1]", a.theta)));
    }
    let e = read_ensemble(&a.input)?;
    let report = classify_discontinuities(&e, a.theta)?;
    emit(out, &a.out, &serde_json::to_value(report)?)?;
    Ok(Status::Passed)
}

fn semigroup(c: SemigroupCommand, out: &mut Outputs) -> Result<Status> {
    match c {
        SemigroupCommand::Build {
            path,
            interp,
            grid,
            out: target,
        } => {
            let path = read_path(&path, interp)?;
            let times = match grid.grid_steps {
                Some(0) => return Err(usage("--grid-steps must be positive")),
                Some(s) => uniform(path.horizon(), s),
                None if grid.grid.is_empty() => path.breakpoints(),
                None => grid.grid,
            };
            check_times(&times, path.horizon())?;
            let table = build_minimal_semigroup(&path, &times)?;
            out.write(&target, |w| Ok(table.write_json(w)?))?;
            Ok(Status::Passed)
        }
        SemigroupCommand::Check {
            table,
            path,
            interp,
            tol,
            out: target,
        } => {
            let tab = read_table(&table)?;
            let path = read_path(&path, interp)?;
            let report = check_semigroup(&tab, &path, tol)?;
            let mut value = serde_json::to_value(&report)?;
            value["failures"] = json!(report.failures());
            emit(out, &target, &value)?;
            Ok(if report.passed {
                Status::Passed
            } else {
                Status::Failed
            })
        }
        SemigroupCommand::Sample {
            table,
            y0,
            n,
            seed,
            out: target,
        } => {
            let tab = read_table(&table)?;
            let y0 = point(&y0)?;
            out.seed(seed);
            let e = sample_inhomogeneous_chain(&tab, &y0, n, seed)?;
            out.write(&target, |w| Ok(e.write_jsonl(w)?))?;
            Ok(Status::Passed)
        }
    }
}

fn law(sampler: &str, k: usize) -> Result<Box<dyn MatrixLaw>> {
    if sampler == "identity" {
        return Ok(Box::new(IdentityLaw { k }));
    }
    if let Some(file) = sampler.strip_prefix("fixed:") {
        let text = fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
        let q: StochasticMatrix =
            serde_json::from_str(&text).with_context(|| format!("parsing {file}"))?;
        return Ok(Box::new(FixedLaw(q)));
    }
    if let Some(file) = sampler.strip_prefix("mix:") {
        let text = fs::read_to_string(file).with_context(|| format!("reading {file}"))?;
        return Ok(Box::new(
            MixtureLaw::from_json(&text).with_context(|| format!("parsing {file}"))?,
        ));
    }
    Err(usage(format!(
        "unknown sampler '{sampler}'; use identity, fixed:FILE or mix:FILE"
    )))
}

fn discrete(a: DiscreteArgs, out: &mut Outputs) -> Result<Status> {
    let y0 = point(&a.y0)?;
    let law = law(&a.sampler, y0.k())?;
    if law.k() != y0.k() {
        return Err(usage(format!(
            "sampler has k = {}, --y0 has k = {}",
            law.k(),
            y0.k()
        )));
    }
    out.seed(a.seed);
    let (trace, e) = simulate_discrete(law.as_ref(), &y0, a.n, a.steps, a.seed)?;
    out.write_json(&a.out_trace, &trace)?;
    out.write(&a.out_ensemble, |w| Ok(e.write_jsonl(w)?))?;
    if !a.verify {
        return Ok(Status::Passed);
    }
    let report = verify_discrete(&trace, &e, a.tol)?;
    print_json(&serde_json::to_value(&report)?)?;
    Ok(if report.passed {
        Status::Passed
    } else {
        Status::Failed
    })
}

fn fixtures(c: FixtureCommand, out: &mut Outputs) -> Result<Status> {
    match c {
        FixtureCommand::Cantor {
            n,
            seed,
            out: target,
            limit_csv,
            pieces,
        } => {
            out.seed(seed);
            let clock = MonotoneClock::Cantor;
            let e = singular_clock_process(&clock, n, seed)?;
            out.write(&target, |w| Ok(e.write_jsonl(w)?))?;
            if let Some(p) = limit_csv {
                let path = clock.limit_path(pieces)?;
                out.write(&p, |w| Ok(path.write_csv(w)?))?;
            }
        }
        FixtureCommand::Threshold {
            y0,
            n,
            horizon,
            seed,
            out: target,
        } => {
            out.seed(seed);
            let e = threshold_process(y0, n, horizon, seed)?;
            out.write(&target, |w| Ok(e.write_jsonl(w)?))?;
        }
        FixtureCommand::RecolorPair {
            n,
            horizon,
            seed,
            out_x,
            out_z,
        } => {
            out.seed(seed);
            let (x, z) = poisson_recolor_pair(n, horizon, seed)?;
            out.write(&out_x, |w| Ok(x.write_jsonl(w)?))?;
            out.write(&out_z, |w| Ok(z.write_jsonl(w)?))?;
        }
        FixtureCommand::FellerPair {
            p,
            n,
            horizon,
            seed,
            out_a,
            out_b,
        } => {
            out.seed(seed);
            let (a, b) = feller_degenerate_pair(p, n, horizon, seed)?;
            out.write(&out_a, |w| Ok(a.write_jsonl(w)?))?;
            out.write(&out_b, |w| Ok(b.write_jsonl(w)?))?;
        }
    }
    Ok(Status::Passed)
}

fn verify_all(a: VerifyAllArgs, out: &mut Outputs) -> Result<Status> {
    let ids: Vec<u8> = if a.only.is_empty() {
        CRITERIA.iter().map(|(id, _)| *id).collect()
    } else {
        a.only.clone()
    };
    if let Some(bad) = ids
        .iter()
        .find(|id| !CRITERIA.iter().any(|(i, _)| i == *id))
    {
        return Err(usage(format!("no criterion {bad}")));
    }
    let opts = SuiteOptions {
        seed: a.seed,
        quick: a.quick,
    };
    out.seed(a.seed);
    let mut stdout = std::io::stdout().lock();
    let mut criteria = Vec::with_capacity(ids.len());
    for id in ids {
        let c = run_criterion(id, &opts);
        let mark = if c.passed { "PASS" } else { "FAIL" };
        writeln!(stdout, "criterion {:>2} {:<24} {mark}", c.id, c.name)?;
        criteria.push(c);
    }
    let report = SuiteReport {
        seed: a.seed,
        quick: a.quick,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    };
    out.write_json(&a.out, &report)?;
    if report.passed {
        writeln!(stdout, "all criteria passed")?;
        return Ok(Status::Passed);
    }
    let failed: Vec<String> = report
        .criteria
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.id.to_string())
        .collect();
    writeln!(stdout, "failed criteria: {}", failed.join(", "))?;
    Ok(Status::Failed)
}
