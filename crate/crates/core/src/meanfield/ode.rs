use crate::error::{Error, Result};
use crate::integrate::{dormand_prince, Options};
use crate::path::SimplexPath;
use crate::simplex::SimplexPoint;

use super::RateField;

/// Steps never exceed `horizon / MIN_STEPS`, so the sampled path is dense
/// enough to interpolate.
const MIN_STEPS: f64 = 256.0;

/// Fluid-limit trajectory `y_t` as a right-continuous sampled path.
///
/// Adaptive Dormand–Prince; every accepted state is clamped and renormalized
/// onto the simplex.
pub fn solve_ode(
    field: &RateField,
    y0: &SimplexPoint,
    horizon: f64,
    tol: f64,
) -> Result<SimplexPath> {
    solve_ode_at(field, y0, horizon, tol, &[])
}

/// As [`solve_ode`], with samples landing exactly on each time in `stops`.
pub fn solve_ode_at(
    field: &RateField,
    y0: &SimplexPoint,
    horizon: f64,
    tol: f64,
    stops: &[f64],
) -> Result<SimplexPath> {
    let track = FluidTrack::solve(field, y0, horizon, tol, stops)?;
    let samples = track
        .times
        .iter()
        .zip(&track.states)
        .map(|(t, y)| Ok((*t, SimplexPoint::new(y.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    SimplexPath::step(samples, horizon)
}

/// The raw integrator output, with linear interpolation between steps.
#[derive(Debug, Clone)]
pub struct FluidTrack {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl FluidTrack {
    pub fn solve(
        field: &RateField,
        y0: &SimplexPoint,
        horizon: f64,
        tol: f64,
        stops: &[f64],
    ) -> Result<Self> {
        if y0.k() != field.k() {
            return Err(Error::Dimension {
                expected: field.k(),
                got: y0.k(),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("bad horizon {horizon}")));
        }
        if !(tol.is_finite() && tol > 0.0) {
            return Err(Error::InvalidArgument(format!("bad tolerance {tol}")));
        }
        let opts = Options {
            tol,
            max_step: horizon / MIN_STEPS,
            project: Some(project_simplex),
        };
        let mut scratch = vec![0.0; field.k()];
        let rhs = |_t: f64, y: &[f64]| {
            scratch.copy_from_slice(y);
            project_simplex(&mut scratch);
            drift_with_rates_at(field, y, &scratch)
        };
        let out = dormand_prince(rhs, 0.0, y0.weights().to_vec(), horizon, stops, &opts)?;
        let (times, states) = out.into_iter().unzip();
        Ok(FluidTrack { times, states })
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Linear interpolation of the integrator states at `t` (clamped to the horizon).
    pub fn at(&self, t: f64, out: &mut [f64]) {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            out.copy_from_slice(&self.states[0]);
            return;
        }
        if idx == self.times.len() {
            out.copy_from_slice(&self.states[idx - 1]);
            return;
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (&self.states[idx - 1], &self.states[idx]);
        for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
            *o = x + w * (y - x);
        }
    }
}

/// Fluxes use the raw stage state; rates are evaluated at its simplex projection.
fn drift_with_rates_at(field: &RateField, y: &[f64], at: &[f64]) -> Result<Vec<f64>> {
    let k = field.k();
    let mut out = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                let flux = field.rate(i, j, at)? * y[i];
                out[j] += flux;
                out[i] -= flux;
            }
        }
    }
    Ok(out)
}

pub(crate) fn project_simplex(y: &mut [f64]) {
    y.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = y.iter().sum();
    if s > 0.0 {
        y.iter_mut().for_each(|x| *x /= s);
    }
}
