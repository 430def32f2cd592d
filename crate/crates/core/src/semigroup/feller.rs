use serde::Serialize;

use crate::error::{Error, Result};
use crate::meanfield::{solve_ode_at, RateField};
use crate::simplex::{identity, matrix_exp, row_times, SimplexPoint};

use super::check::probe_indices;
use super::table::{check_grid, Origin, SemigroupTable};

/// Gaps at which `Q_{0,t}` is compared with the identity.
pub const CONTINUITY_GAPS: [f64; 3] = [0.1, 0.01, 0.001];

#[derive(Debug, Clone, Serialize)]
pub struct FellerReport {
    /// Largest `|Q_{r,t} − Q_{r,s}Q_{s,t}|` with every matrix exponentiated directly.
    pub cocycle_residual: f64,
    /// Largest `|Q_{s,t} − Q_{s',t'}|` over pairs of equal gap, with `Q_{s,t}`
    /// taken as the ordered product of grid factors.
    pub stationarity_residual: f64,
    /// `(t, max|Q_{0,t} − I|)` for each continuity gap.
    pub continuity: Vec<(f64, f64)>,
    pub continuity_monotone: bool,
    /// Half-L1 gap between `y0·Q_{0,t}` and the fluid path, when `y0` is given.
    pub ode_residual: Option<f64>,
    #[serde(skip)]
    pub table: SemigroupTable,
}

impl FellerReport {
    pub fn max_residual(&self) -> f64 {
        self.cocycle_residual
            .max(self.stationarity_residual)
            .max(self.ode_residual.unwrap_or(0.0))
    }
}

/// Deterministic flow `Q_{s,t} = exp((t − s)·R)` of a constant field.
///
/// The field must be constant over the simplex. Checks the cocycle relation,
/// that factors depend only on the gap, and continuity at `t ↓ 0`. With `y0`
/// the flow is also compared against the fluid ODE at every grid time.
pub fn feller_flow_check(
    field: &RateField,
    horizon: f64,
    grid: &[f64],
    y0: Option<&SimplexPoint>,
) -> Result<FellerReport> {
    let r = field.constant_generator()?;
    check_grid(grid)?;
    if grid[grid.len() - 1] > horizon {
        return Err(Error::TimeOutOfRange {
            t: grid[grid.len() - 1],
            horizon,
        });
    }
    let k = field.k();
    let factors = grid
        .windows(2)
        .map(|w| matrix_exp(&r, w[1] - w[0]))
        .collect::<Result<Vec<_>>>()?;
    let table = SemigroupTable::new(
        grid.to_vec(),
        factors,
        vec![0.0; grid.len() - 1],
        Origin::ConstructedFromPath,
    )?;
    let max_diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };

    let probes = probe_indices(grid.len());
    let mut cocycle: f64 = 0.0;
    for (a, &i) in probes.iter().enumerate() {
        for (b, &j) in probes.iter().enumerate().skip(a + 1) {
            let q_ij = matrix_exp(&r, grid[j] - grid[i])?;
            for &l in &probes[b + 1..] {
                let q_jl = matrix_exp(&r, grid[l] - grid[j])?;
                let q_il = matrix_exp(&r, grid[l] - grid[i])?;
                let composed = q_ij.compose(&q_jl)?;
                cocycle = cocycle.max(max_diff(q_il.entries(), composed.entries()));
            }
        }
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    for (a, &i) in probes.iter().enumerate() {
        for &j in &probes[a + 1..] {
            pairs.push((grid[j] - grid[i], table.product_raw(i, j)));
        }
    }
    let mut stationarity: f64 = 0.0;
    for (x, (gap, q)) in pairs.iter().enumerate() {
        for (gap2, q2) in &pairs[x + 1..] {
            if (gap - gap2).abs() <= 1e-12 * gap.max(1.0) {
                stationarity = stationarity.max(max_diff(q, q2));
            }
        }
        // products must also agree with the exponential of the whole gap
        stationarity = stationarity.max(max_diff(q, matrix_exp(&r, *gap)?.entries()));
    }

    let id = identity(k);
    let continuity = CONTINUITY_GAPS
        .iter()
        .map(|&t| Ok((t, max_diff(matrix_exp(&r, t)?.entries(), &id))))
        .collect::<Result<Vec<_>>>()?;
    let continuity_monotone = continuity.windows(2).all(|w| w[1].1 <= w[0].1);

    let ode_residual = match y0 {
        None => None,
        Some(y0) => {
            let path = solve_ode_at(field, y0, horizon, 1e-12, grid)?;
            let mut worst: f64 = 0.0;
            for &t in grid {
                let q0 = matrix_exp(&r, t)?;
                let pushed = row_times(y0.weights(), q0.entries(), k);
                let want = path.eval(t)?;
                let gap: f64 = pushed
                    .iter()
                    .zip(want.weights())
                    .map(|(a, b)| (a - b).abs())
                    .sum();
                worst = worst.max(0.5 * gap);
            }
            Some(worst)
        }
    };

    Ok(FellerReport {
        cocycle_residual: cocycle,
        stationarity_residual: stationarity,
        continuity,
        continuity_monotone,
        ode_residual,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_flow_is_identity() {
        let f = RateField::zero(3).unwrap();
        let rep = feller_flow_check(&f, 1.0, &[0.0, 0.5, 1.0], None).unwrap();
        assert_eq!(rep.max_residual(), 0.0);
        assert!(rep.continuity.iter().all(|(_, d)| *d == 0.0));
        for q in rep.table.factors() {
            assert_eq!(q.entries(), identity(3).as_slice());
        }
    }

    #[test]
    fn two_state_closed_form() {
        let f = RateField::constant(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let grid: Vec<f64> = (0..=8).map(|i| i as f64 * 0.25).collect();
        let y0 = SimplexPoint::vertex(2, 0).unwrap();
        let rep = feller_flow_check(&f, 2.0, &grid, Some(&y0)).unwrap();
        assert!(rep.max_residual() <= 1e-9, "{rep:?}");
        assert!(rep.continuity_monotone);
        for i in 0..grid.len() {
            for j in i..grid.len() {
                let gap = grid[j] - grid[i];
                let q = rep.table.q(i, j).unwrap();
                assert!((q.get(0, 0) - (1.0 + (-2.0 * gap).exp()) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_constant_field_is_rejected() {
        let f = RateField::new(
            2,
            |i, _, y: &[f64]| y[1 - i],
            vec![0.0, 1.0, 1.0, 0.0],
            1.0,
            "voter",
        )
        .unwrap();
        assert!(feller_flow_check(&f, 1.0, &[0.0, 1.0], None).is_err());
    }
}
