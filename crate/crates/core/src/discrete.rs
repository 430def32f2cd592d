//! Discrete-time exchangeable chains driven by a law on stochastic matrices.
//!
//! At each step one matrix `Q` is drawn from `G(Yₙ)` and shared by every
//! coordinate; each coordinate then moves independently by its row of `Q`,
//! and the marginal follows `Yₙ₊₁ = Yₙ·Q` exactly.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{EnsemblePath, FlipEvent};
use crate::error::{Error, Result};
use crate::projection::transition_counts;
use crate::rng::{sample_index, stream, StreamRng, SHARED_STREAM};
use crate::simplex::{row_times, SimplexPoint, StochasticMatrix};

/// A map from simplex points to laws on `k × k` stochastic matrices.
pub trait MatrixLaw: Send + Sync {
    fn k(&self) -> usize;

    /// One draw from `G(y)`, as row-major entries. Validated by the caller.
    fn draw(&self, y: &[f64], rng: &mut StreamRng) -> Vec<f64>;

    fn describe(&self) -> String;
}

/// `G ≡ δ_I`.
#[derive(Debug, Clone, Copy)]
pub struct IdentityLaw {
    pub k: usize,
}

impl MatrixLaw for IdentityLaw {
    fn k(&self) -> usize {
        self.k
    }

    fn draw(&self, _y: &[f64], _rng: &mut StreamRng) -> Vec<f64> {
        crate::simplex::identity(self.k)
    }

    fn describe(&self) -> String {
        "identity".into()
    }
}

/// `G ≡ δ_Q`.
#[derive(Debug, Clone)]
pub struct FixedLaw(pub StochasticMatrix);

impl MatrixLaw for FixedLaw {
    fn k(&self) -> usize {
        self.0.k()
    }

    fn draw(&self, _y: &[f64], _rng: &mut StreamRng) -> Vec<f64> {
        self.0.entries().to_vec()
    }

    fn describe(&self) -> String {
        "fixed".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub matrix: StochasticMatrix,
}

/// A finite mixture of point masses, independent of `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureLaw {
    pub components: Vec<MixtureComponent>,
    #[serde(skip)]
    probs: Vec<f64>,
}

impl MixtureLaw {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let k = first.matrix.k();
        if let Some(c) = components.iter().find(|c| c.matrix.k() != k) {
            return Err(Error::Dimension {
                expected: k,
                got: c.matrix.k(),
            });
        }
        if components
            .iter()
            .any(|c| !(c.weight.is_finite() && c.weight >= 0.0))
        {
            return Err(Error::InvalidArgument(
                "mixture weights must be finite and ≥ 0".into(),
            ));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("mixture weights sum to zero".into()));
        }
        let probs = components.iter().map(|c| c.weight / total).collect();
        Ok(MixtureLaw { components, probs })
    }

    /// Parses `{"components": [{"weight": w, "matrix": [[…], …]}, …]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MixtureLaw = serde_json::from_str(text)?;
        Self::new(raw.components)
    }
}

impl MatrixLaw for MixtureLaw {
    fn k(&self) -> usize {
        self.components[0].matrix.k()
    }

    fn draw(&self, _y: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        let c = sample_index(&self.probs, rng.random());
        self.components[c].matrix.entries().to_vec()
    }

    fn describe(&self) -> String {
        format!("mixture of {}", self.components.len())
    }
}

type DrawFn = dyn Fn(&[f64], &mut StreamRng) -> Vec<f64> + Send + Sync;

/// A law given by a closure, for state-dependent `G`.
#[derive(Clone)]
pub struct FnLaw {
    k: usize,
    label: String,
    f: Arc<DrawFn>,
}

impl FnLaw {
    pub fn new<F>(k: usize, label: &str, f: F) -> Self
    where
        F: Fn(&[f64], &mut StreamRng) -> Vec<f64> + Send + Sync + 'static,
    {
        FnLaw {
            k,
            label: label.into(),
            f: Arc::new(f),
        }
    }
}

impl MatrixLaw for FnLaw {
    fn k(&self) -> usize {
        self.k
    }

    fn draw(&self, y: &[f64], rng: &mut StreamRng) -> Vec<f64> {
        (self.f)(y, rng)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Drawn matrices and the exact marginal recursion of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTrace {
    pub k: usize,
    pub sampler: String,
    /// `Y₀, …, Y_steps`, with `Yₙ₊₁ = Yₙ·Qₙ₊₁` computed in floating point.
    pub marginals: Vec<Vec<f64>>,
    /// `Q₁, …, Q_steps`.
    pub matrices: Vec<StochasticMatrix>,
}

impl DiscreteTrace {
    pub fn steps(&self) -> usize {
        self.matrices.len()
    }
}

/// Runs `steps` steps of the chain on `n` sites.
///
/// Matrices come from the shared stream of `seed`; site `c` uses stream
/// `(seed, c)` for its initial color and its moves. Flips at step `m` are
/// stamped at time `m`.
pub fn simulate_discrete(
    law: &dyn MatrixLaw,
    y0: &SimplexPoint,
    n: usize,
    steps: usize,
    seed: u64,
) -> Result<(DiscreteTrace, EnsemblePath)> {
    let k = law.k();
    if y0.k() != k {
        return Err(Error::Dimension {
            expected: k,
            got: y0.k(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    let mut shared = stream(seed, SHARED_STREAM);
    let mut marginals = vec![y0.weights().to_vec()];
    let mut matrices = Vec::with_capacity(steps);
    for step in 1..=steps {
        let y = &marginals[step - 1];
        let raw = law.draw(y, &mut shared);
        if raw.len() != k * k {
            return Err(Error::Sampler {
                step,
                reason: format!("{} entries for k = {k}", raw.len()),
            });
        }
        let q = StochasticMatrix::new(raw).map_err(|e| Error::Sampler {
            step,
            reason: e.to_string(),
        })?;
        marginals.push(row_times(y, q.entries(), k));
        matrices.push(q);
    }

    let per_site: Vec<(usize, Vec<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let mut rng = stream(seed, site as u64);
            let start = sample_index(y0.weights(), rng.random());
            let mut color = start;
            let mut flips = Vec::new();
            for (m, q) in matrices.iter().enumerate() {
                let next = sample_index(q.row(color), rng.random());
                if next != color {
                    flips.push(FlipEvent {
                        t: (m + 1) as f64,
                        site,
                        from: color,
                        to: next,
                    });
                    color = next;
                }
            }
            (start, flips)
        })
        .collect();
    let initial = per_site.iter().map(|(c, _)| *c).collect();
    let events = per_site.into_iter().flat_map(|(_, f)| f).collect();
    let ensemble = EnsemblePath::from_unsorted(k, steps as f64, seed, initial, events)?;
    let trace = DiscreteTrace {
        k,
        sampler: law.describe(),
        marginals,
        matrices,
    };
    Ok((trace, ensemble))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowExcess {
    pub step: usize,
    pub row: usize,
    pub gap: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscreteReport {
    /// Fixed tolerance for `|Q̂ − Q|`, or `None` for the per-row default.
    pub tol: Option<f64>,
    /// Largest `|Yₙ·Qₙ₊₁ − Yₙ₊₁|` over the trace; zero for an untouched trace.
    pub recursion_residual: f64,
    /// Per step, largest `|Q̂ − Q|` over rows occupied at the step start.
    pub step_gaps: Vec<f64>,
    pub max_gap: f64,
    pub row_excesses: Vec<RowExcess>,
    /// Every unoccupied row of every `Q̂` is the unit row of its color.
    pub unsupported_rows_delta: bool,
    pub passed: bool,
}

/// Default tolerance for a row of `Q̂` estimated from `support` sites: `5/√support`.
pub fn default_row_tol(support: u64) -> f64 {
    5.0 / (support as f64).sqrt()
}

/// Checks a trace and the ensemble from the same run.
///
/// Row `i` of each step's `Q̂` is compared with the drawn matrix within
/// `tol`, or within [`default_row_tol`] of the row's support when `tol` is
/// `None`. With every row fully occupied the default is close to `5/√n`.
pub fn verify_discrete(
    trace: &DiscreteTrace,
    ensemble: &EnsemblePath,
    tol: Option<f64>,
) -> Result<DiscreteReport> {
    let k = trace.k;
    if ensemble.k() != k {
        return Err(Error::Dimension {
            expected: k,
            got: ensemble.k(),
        });
    }
    if trace.marginals.len() != trace.steps() + 1 {
        return Err(Error::InvalidArgument(format!(
            "{} marginals for {} steps",
            trace.marginals.len(),
            trace.steps()
        )));
    }
    if ensemble.horizon() != trace.steps() as f64 {
        return Err(Error::InvalidArgument(format!(
            "ensemble horizon {} does not match {} steps",
            ensemble.horizon(),
            trace.steps()
        )));
    }

    let mut recursion: f64 = 0.0;
    for (m, q) in trace.matrices.iter().enumerate() {
        let pushed = row_times(&trace.marginals[m], q.entries(), k);
        for (a, b) in pushed.iter().zip(&trace.marginals[m + 1]) {
            recursion = recursion.max((a - b).abs());
        }
    }

    let mut step_gaps = Vec::with_capacity(trace.steps());
    let mut row_excesses = Vec::new();
    let mut delta_rows = true;
    for (m, q) in trace.matrices.iter().enumerate() {
        let counts = transition_counts(ensemble, m as f64, (m + 1) as f64)?;
        let qhat = counts.to_matrix();
        let mut step_gap: f64 = 0.0;
        for i in 0..k {
            let support = counts.row_total(i);
            if support == 0 {
                delta_rows &= (0..k).all(|j| qhat.get(i, j) == if i == j { 1.0 } else { 0.0 });
                continue;
            }
            let gap = (0..k)
                .map(|j| (qhat.get(i, j) - q.get(i, j)).abs())
                .fold(0.0, f64::max);
            let row_tol = tol.unwrap_or_else(|| default_row_tol(support));
            if gap > row_tol {
                row_excesses.push(RowExcess {
                    step: m + 1,
                    row: i,
                    gap,
                    tol: row_tol,
                });
            }
            step_gap = step_gap.max(gap);
        }
        step_gaps.push(step_gap);
    }
    let max_gap = step_gaps.iter().copied().fold(0.0, f64::max);
    Ok(DiscreteReport {
        tol,
        recursion_residual: recursion,
        passed: recursion == 0.0 && row_excesses.is_empty() && delta_rows,
        step_gaps,
        max_gap,
        row_excesses,
        unsupported_rows_delta: delta_rows,
    })
}
