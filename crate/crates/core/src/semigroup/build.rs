use crate::error::{Error, Result};
use crate::path::{Piece, SimplexPath};
use crate::simplex::{identity, matmul, matrix_exp, tv_distance, SimplexPoint, StochasticMatrix};

use super::table::{check_grid, Origin, SemigroupTable};
use super::transport::{flux_generator, jump_transport_matrix, OCCUPANCY_FLOOR};

#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Sub-partitions are doubled until the factor product moves less than this.
    pub refine_tol: f64,
    pub max_doublings: u32,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            refine_tol: 1e-8,
            max_doublings: 12,
        }
    }
}

/// Minimal compatible semigroup of `path` on `grid`.
///
/// Each grid step is decomposed into the path's jumps and straight drifts.
/// Jumps contribute [`jump_transport_matrix`]. A drift is cut into pieces of
/// equal total variation; each piece contributes the exponential of the
/// minimal-flux generator accumulated over it, and the partition is refined
/// until the product settles.
pub fn build_minimal_semigroup(path: &SimplexPath, grid: &[f64]) -> Result<SemigroupTable> {
    build_minimal_semigroup_with(path, grid, BuildOptions::default())
}

pub fn build_minimal_semigroup_with(
    path: &SimplexPath,
    grid: &[f64],
    opts: BuildOptions,
) -> Result<SemigroupTable> {
    check_grid(grid)?;
    if grid[grid.len() - 1] > path.horizon() {
        return Err(Error::TimeOutOfRange {
            t: grid[grid.len() - 1],
            horizon: path.horizon(),
        });
    }
    let k = path.k();
    let mut factors = Vec::with_capacity(grid.len() - 1);
    let mut transfer = Vec::with_capacity(grid.len() - 1);
    for w in grid.windows(2) {
        let mut acc = identity(k);
        let mut moved = 0.0;
        for piece in path.pieces(w[0], w[1])? {
            let (q, m) = match &piece {
                Piece::Jump { at, from, to } => {
                    let q = jump_transport_matrix(from, to).map_err(|e| at_time(*at, e))?;
                    let m = q.mass_transfer(from)?;
                    (q, m)
                }
                Piece::Drift { end, from, to, .. } => {
                    drift_factor(from, to, opts).map_err(|e| at_time(*end, e))?
                }
            };
            acc = matmul(&acc, q.entries(), k);
            moved += m;
        }
        factors.push(StochasticMatrix::new(acc)?);
        transfer.push(moved);
    }
    SemigroupTable::new(
        grid.to_vec(),
        factors,
        transfer,
        Origin::ConstructedFromPath,
    )
}

fn at_time(t: f64, e: Error) -> Error {
    match e {
        Error::Construction { .. } => e,
        other => Error::Construction {
            t,
            reason: other.to_string(),
        },
    }
}

/// Product over a TV-uniform partition of the straight drift `from → to`,
/// refined by doubling. Returns the factor and the mass it moves.
fn drift_factor(
    from: &SimplexPoint,
    to: &SimplexPoint,
    opts: BuildOptions,
) -> Result<(StochasticMatrix, f64)> {
    let k = from.k();
    let mut previous: Option<Vec<f64>> = None;
    for level in 0..=opts.max_doublings {
        let parts = 1usize << level;
        let mut acc = identity(k);
        let mut moved = 0.0;
        let mut a = from.clone();
        for m in 1..=parts {
            let b = if m == parts {
                to.clone()
            } else {
                from.lerp(to, m as f64 / parts as f64)?
            };
            let q = straight_piece(&a, &b)?;
            moved += q.mass_transfer(&a)?;
            acc = matmul(&acc, q.entries(), k);
            a = b;
        }
        if let Some(prev) = &previous {
            let change = prev
                .iter()
                .zip(&acc)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if change < opts.refine_tol {
                return Ok((StochasticMatrix::new(acc)?, moved));
            }
        }
        previous = Some(acc);
    }
    Err(Error::Construction {
        t: f64::NAN,
        reason: format!(
            "drift product did not settle after {} doublings",
            opts.max_doublings
        ),
    })
}

/// `exp(ΔT · R(dY/dT, ỹ))` for a straight move `a → b` of length `ΔT`.
///
/// Along a straight line the minimal-flux generators at different times
/// commute, so the ordered exponential is the exponential of the integrated
/// generator. For a losing color the integral of `1/yᵢ(u)` is captured by
/// evaluating occupancy at the logarithmic mean of `aᵢ` and `bᵢ`.
fn straight_piece(a: &SimplexPoint, b: &SimplexPoint) -> Result<StochasticMatrix> {
    let k = a.k();
    let length = tv_distance(a, b)?;
    if length == 0.0 {
        return StochasticMatrix::identity(k);
    }
    let mut direction: Vec<f64> = (0..k).map(|i| (b.get(i) - a.get(i)) / length).collect();
    // on very short pieces rounding in the endpoints unbalances gains and losses
    let loss: f64 = direction.iter().filter(|v| **v < 0.0).map(|v| -v).sum();
    let gain: f64 = direction.iter().filter(|v| **v > 0.0).sum();
    if gain > 0.0 {
        direction
            .iter_mut()
            .filter(|v| **v > 0.0)
            .for_each(|v| *v *= loss / gain);
    }
    let mut occupancy = a.weights().to_vec();
    for (i, occ) in occupancy.iter_mut().enumerate() {
        if b.get(i) < a.get(i) {
            if b.get(i) <= OCCUPANCY_FLOOR {
                // the generator integral diverges; use its limit
                return jump_transport_matrix(a, b);
            }
            *occ = log_mean(a.get(i), b.get(i));
        }
    }
    let r = flux_generator(&direction, &occupancy, OCCUPANCY_FLOOR)?;
    matrix_exp(&r, length)
}

/// `(a − b) / ln(a / b)`, stable as `a → b`.
fn log_mean(a: f64, b: f64) -> f64 {
    let x = (a - b) / b;
    if x == 0.0 {
        return b;
    }
    b * x / x.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(w: &[f64]) -> SimplexPoint {
        SimplexPoint::new(w.to_vec()).unwrap()
    }

    #[test]
    fn log_mean_limits() {
        assert_eq!(log_mean(0.3, 0.3), 0.3);
        assert!((log_mean(0.3, 0.3 * (1.0 + 1e-12)) - 0.3).abs() < 1e-12);
        let want = (0.8 - 0.2) / (0.8f64 / 0.2).ln();
        assert!((log_mean(0.8, 0.2) - want).abs() < 1e-15);
    }

    #[test]
    fn straight_piece_equals_closed_form() {
        let (a, b) = (pt(&[0.6, 0.3, 0.1]), pt(&[0.2, 0.35, 0.45]));
        let q = straight_piece(&a, &b).unwrap();
        let closed = jump_transport_matrix(&a, &b).unwrap();
        assert!(q.max_abs_diff(&closed) < 1e-12);
        let onto_vertex = straight_piece(&pt(&[0.5, 0.5]), &pt(&[0.0, 1.0])).unwrap();
        assert_eq!(onto_vertex.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn examples() {
        let c = SimplexPath::constant(pt(&[0.3, 0.7]), 1.0).unwrap();
        let tab = build_minimal_semigroup(&c, &[0.0, 0.5, 1.0]).unwrap();
        for f in tab.factors() {
            assert_eq!(f, &StochasticMatrix::identity(2).unwrap());
        }

        let jump =
            SimplexPath::step(vec![(0.0, pt(&[1.0, 0.0])), (0.5, pt(&[0.0, 1.0]))], 1.0).unwrap();
        let tab = build_minimal_semigroup(&jump, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(tab.factors()[0].row(0), &[0.0, 1.0]);
        assert_eq!(tab.factors()[0].row(1), &[0.0, 1.0]);
        assert_eq!(tab.factors()[1], StochasticMatrix::identity(2).unwrap());
        assert_eq!(tab.transfer(), &[1.0, 0.0]);

        let lin = SimplexPath::linear(pt(&[0.8, 0.2]), pt(&[0.2, 0.8]), 1.0).unwrap();
        let tab = build_minimal_semigroup(&lin, &[0.0, 1.0]).unwrap();
        let pushed = pt(&[0.8, 0.2]).act_raw(&tab.factors()[0]).unwrap();
        assert!((pushed[1] - 0.8).abs() <= 1e-8);
        assert!((tab.transfer()[0] - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn grid_outside_path_is_rejected() {
        let c = SimplexPath::constant(pt(&[0.3, 0.7]), 1.0).unwrap();
        assert!(build_minimal_semigroup(&c, &[0.0, 2.0]).is_err());
        assert!(build_minimal_semigroup(&c, &[0.5]).is_err());
    }
}
