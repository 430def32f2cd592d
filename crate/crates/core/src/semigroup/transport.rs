//! Minimal mass-transport generators and the matrices they integrate to.

use crate::error::{Error, Result};
use crate::integrate::{dormand_prince, Options};
use crate::simplex::{matmul, tv_distance, GeneratorMatrix, SimplexPoint, StochasticMatrix};

/// Occupancy below which a color is treated as empty.
pub const OCCUPANCY_FLOOR: f64 = 1e-10;

/// Rate matrix that moves mass along `v` out of the current occupancy `y`.
///
/// Every losing color `i` (`vᵢ < 0`) empties at per-capita rate `−vᵢ/yᵢ`
/// and sends that outflow to the gaining colors in proportion to their
/// gains `(vⱼ)₊ / S₊`. Rows of gaining and unchanged colors are zero, so no
/// mass ever moves twice and `y · R = v`.
pub fn rate_matrix(v: &[f64], y: &SimplexPoint) -> Result<GeneratorMatrix> {
    rate_matrix_with_floor(v, y, OCCUPANCY_FLOOR)
}

pub fn rate_matrix_with_floor(v: &[f64], y: &SimplexPoint, floor: f64) -> Result<GeneratorMatrix> {
    flux_generator(v, y.weights(), floor)
}

/// As [`rate_matrix`], reading occupancy from a raw slice that need not sum to one.
pub(crate) fn flux_generator(v: &[f64], y: &[f64], floor: f64) -> Result<GeneratorMatrix> {
    let k = y.len();
    if v.len() != k {
        return Err(Error::Dimension {
            expected: k,
            got: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("direction vector"));
    }
    let scale = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
    let sum: f64 = v.iter().sum();
    if sum.abs() > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "direction must sum to zero, sums to {sum}"
        )));
    }
    let gain: f64 = v.iter().map(|x| x.max(0.0)).sum();
    let mut r = vec![0.0; k * k];
    if gain > 0.0 {
        for i in 0..k {
            if v[i] >= 0.0 {
                continue;
            }
            let yi = y[i];
            if yi <= floor {
                return Err(Error::ZeroMassOutflow {
                    color: i,
                    outflow: -v[i],
                    mass: yi,
                });
            }
            let out = -v[i] / yi;
            for j in 0..k {
                if v[j] > 0.0 {
                    r[i * k + j] = out * v[j] / gain;
                }
            }
            r[i * k + i] = v[i] / yi;
        }
    }
    GeneratorMatrix::new(r)
}

/// Closed-form transport along the straight line from `y` to `y′`.
///
/// With `D = Σⱼ (y′ⱼ − yⱼ)₊`: rows of colors that do not lose mass are `δᵢ`;
/// a losing color keeps the fraction `y′ᵢ/yᵢ` and spreads the rest over the
/// gainers in proportion to their gains. `y · Q = y′` and the mass moved is
/// exactly `tv_distance(y, y′)`.
pub fn jump_transport_matrix(y: &SimplexPoint, y_next: &SimplexPoint) -> Result<StochasticMatrix> {
    let k = y.k();
    if y_next.k() != k {
        return Err(Error::Dimension {
            expected: k,
            got: y_next.k(),
        });
    }
    let gains: Vec<f64> = (0..k)
        .map(|j| (y_next.get(j) - y.get(j)).max(0.0))
        .collect();
    let d: f64 = gains.iter().sum();
    let mut q = crate::simplex::identity(k);
    if d == 0.0 {
        return StochasticMatrix::new(q);
    }
    for i in 0..k {
        let (a, b) = (y.get(i), y_next.get(i));
        if b >= a {
            continue;
        }
        if a <= 0.0 {
            return Err(Error::ZeroMassOutflow {
                color: i,
                outflow: a - b,
                mass: a,
            });
        }
        let keep = b / a;
        let leave = (a - b) / a;
        for j in 0..k {
            q[i * k + j] = leave * gains[j] / d;
        }
        q[i * k + i] = keep;
    }
    StochasticMatrix::new(q)
}

/// Reference route for a single straight move: integrates
/// `dQ/du = Q · R(dY/dT, y(u))` along the segment from `y` to `y′`
/// parameterized by total variation, with adaptive Dormand–Prince.
///
/// Every losing color must keep occupancy above the floor at `y′`.
pub fn integrate_opened_segment(
    y: &SimplexPoint,
    y_next: &SimplexPoint,
    tol: f64,
) -> Result<StochasticMatrix> {
    let k = y.k();
    let length = tv_distance(y, y_next)?;
    if length == 0.0 {
        return StochasticMatrix::identity(k);
    }
    let direction: Vec<f64> = (0..k)
        .map(|i| (y_next.get(i) - y.get(i)) / length)
        .collect();
    let rhs = |u: f64, q: &[f64]| {
        let here = SimplexPoint::new(
            (0..k)
                .map(|i| (y.get(i) + u * direction[i]).max(0.0))
                .collect(),
        )?;
        let r = rate_matrix(&direction, &here)?;
        Ok(matmul(q, r.entries(), k))
    };
    let opts = Options {
        tol,
        max_step: length / 16.0,
        project: None,
    };
    let out = dormand_prince(rhs, 0.0, crate::simplex::identity(k), length, &[], &opts)?;
    let (_, q) = out
        .into_iter()
        .last()
        .expect("integrator returns the start state");
    StochasticMatrix::new(
        q.iter()
            .map(|x| if x.abs() < 1e-14 { x.max(0.0) } else { *x })
            .collect(),
    )
}
