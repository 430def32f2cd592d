//! Adaptive Dormand–Prince 5(4) integration for small dense systems.

use crate::error::{Error, Result};

pub(crate) struct Options {
    /// Per-step bound on the max-norm local error estimate.
    pub tol: f64,
    pub max_step: f64,
    /// Applied to the state after every accepted step.
    pub project: Option<fn(&mut [f64])>,
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`, landing exactly on every
/// time in `stops`. Returns every accepted `(t, y)`, starting with `(t0, y0)`.
pub(crate) fn dormand_prince<F>(
    mut f: F,
    t0: f64,
    y0: Vec<f64>,
    t1: f64,
    stops: &[f64],
    opts: &Options,
) -> Result<Vec<(f64, Vec<f64>)>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let dim = y0.len();
    let mut targets: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&s| s > t0 && s < t1)
        .collect();
    targets.push(t1);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let mut out = vec![(t0, y0.clone())];
    let mut t = t0;
    let mut y = y0;
    let mut h = opts.max_step.min((t1 - t0) / 100.0).max(1e-6 * (t1 - t0));
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    let mut stage = vec![0.0; dim];

    for &target in &targets {
        while t < target {
            let last = t + h >= target;
            let step = if last { target - t } else { h };
            if step < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
            k[0] = f(t, &y)?;
            for s in 1..7 {
                for d in 0..dim {
                    let mut acc = 0.0;
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += a * k[j][d];
                    }
                    stage[d] = y[d] + step * acc;
                }
                k[s] = f(t + C[s] * step, &stage)?;
            }
            // k[6] was evaluated at the fifth-order solution, held in `stage`
            let err = (0..dim)
                .map(|d| ((0..7).map(|s| E[s] * k[s][d]).sum::<f64>() * step).abs())
                .fold(0.0, |m: f64, e| if e.is_nan() || e > m { e } else { m });
            if !err.is_finite() {
                return Err(Error::StepUnderflow { t });
            }
            if err <= opts.tol {
                t = if last { target } else { t + step };
                y.copy_from_slice(&stage);
                if let Some(project) = opts.project {
                    project(&mut y);
                }
                out.push((t, y.clone()));
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 5.0)
            };
            // a shortened final step says nothing about the natural step size
            if !(last && err <= opts.tol) {
                h = (step * factor).min(opts.max_step);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_stops() {
        let opts = Options {
            tol: 1e-12,
            max_step: 0.1,
            project: None,
        };
        let out = dormand_prince(
            |_, y| Ok(vec![-y[0]]),
            0.0,
            vec![1.0],
            2.0,
            &[0.5, 1.0],
            &opts,
        )
        .unwrap();
        for (t, y) in &out {
            assert!((y[0] - (-t).exp()).abs() < 1e-10, "t={t}");
        }
        assert!(out.iter().any(|(t, _)| *t == 0.5));
        assert_eq!(out.last().unwrap().0, 2.0);
    }

    #[test]
    fn blow_up_is_reported() {
        let opts = Options {
            tol: 1e-10,
            max_step: 0.1,
            project: None,
        };
        let r = dormand_prince(
            |_, y| Ok(vec![y[0] * y[0]]),
            0.0,
            vec![1.0],
            2.0,
            &[],
            &opts,
        );
        assert!(matches!(r, Err(Error::StepUnderflow { .. })));
    }
}
