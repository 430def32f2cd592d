use serde::Serialize;

use crate::ensemble::EnsemblePath;
use crate::error::{Error, Result};
use crate::path::{path_total_variation, SimplexPath};
use crate::projection::estimate_transition;
use crate::simplex::{l1_raw, matmul, row_times, SimplexPoint};

use super::table::SemigroupTable;

/// Triples and pairs are drawn from at most this many evenly spaced grid indices.
const MAX_PROBE_INDICES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triple {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    /// `T_{r,t} − T_{r,s} − T_{s,t}`
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemigroupReport {
    pub tol: f64,
    pub cocycle_residual: f64,
    pub compatibility_residual: f64,
    pub minimality_gap: f64,
    pub total_transfer: f64,
    pub path_variation: f64,
    /// Per step: table transfer minus the path's variation over the step.
    pub step_gaps: Vec<f64>,
    pub subadditivity_violations: Vec<Triple>,
    pub passed: bool,
}

impl SemigroupReport {
    /// Names of the quantities that exceed the tolerance.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !within(self.cocycle_residual, self.tol) {
            out.push("cocycle_residual");
        }
        if !within(self.compatibility_residual, self.tol) {
            out.push("compatibility_residual");
        }
        if !within(self.minimality_gap, self.tol) {
            out.push("minimality_gap");
        }
        if !self.subadditivity_violations.is_empty() {
            out.push("subadditivity_violations");
        }
        out
    }
}

/// False for NaN.
fn within(x: f64, tol: f64) -> bool {
    x <= tol
}

pub(crate) fn probe_indices(len: usize) -> Vec<usize> {
    if len <= MAX_PROBE_INDICES {
        return (0..len).collect();
    }
    let last = (len - 1) as f64;
    let mut idx: Vec<usize> = (0..MAX_PROBE_INDICES)
        .map(|m| (m as f64 * last / (MAX_PROBE_INDICES - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// Checks a table against a path.
///
/// Compatibility is the half-L1 distance between `Y_s·Q_{s,t}` and `Y_t`,
/// over every grid step and every pair of probe indices. The minimality gap
/// compares the summed step transfers with the path's total variation over
/// the grid span.
pub fn check_semigroup(
    tab: &SemigroupTable,
    path: &SimplexPath,
    tol: f64,
) -> Result<SemigroupReport> {
    if tab.k() != path.k() {
        return Err(Error::Dimension {
            expected: tab.k(),
            got: path.k(),
        });
    }
    let grid = tab.grid();
    let (first, last) = (grid[0], grid[grid.len() - 1]);
    if last > path.horizon() {
        return Err(Error::TimeOutOfRange {
            t: last,
            horizon: path.horizon(),
        });
    }
    let k = tab.k();
    let marginals = grid
        .iter()
        .map(|&t| path.eval(t))
        .collect::<Result<Vec<SimplexPoint>>>()?;

    let probes = probe_indices(grid.len());
    let mut products = vec![vec![Vec::new(); grid.len()]; grid.len()];
    for (a, &i) in probes.iter().enumerate() {
        for &j in &probes[a..] {
            products[i][j] = tab.product_raw(i, j);
        }
    }

    let mut cocycle: f64 = 0.0;
    let mut violations = Vec::new();
    let transfer_of = |i: usize, q: &[f64]| -> f64 {
        (0..k)
            .map(|a| marginals[i].get(a) * (1.0 - q[a * k + a]))
            .sum()
    };
    for (a, &r) in probes.iter().enumerate() {
        for (b, &s) in probes.iter().enumerate().skip(a + 1) {
            for &t in &probes[b + 1..] {
                let composed = matmul(&products[r][s], &products[s][t], k);
                let diff = products[r][t]
                    .iter()
                    .zip(&composed)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                cocycle = cocycle.max(diff);
                let excess = transfer_of(r, &products[r][t])
                    - transfer_of(r, &products[r][s])
                    - transfer_of(s, &products[s][t]);
                if excess > tol {
                    violations.push(Triple {
                        r: grid[r],
                        s: grid[s],
                        t: grid[t],
                        excess,
                    });
                }
            }
        }
    }

    let mut compat: f64 = 0.0;
    for (g, f) in tab.factors().iter().enumerate() {
        let pushed = row_times(marginals[g].weights(), f.entries(), k);
        compat = compat.max(0.5 * l1_raw(&pushed, marginals[g + 1].weights()));
    }
    for (a, &i) in probes.iter().enumerate() {
        for &j in &probes[a + 1..] {
            let pushed = row_times(marginals[i].weights(), &products[i][j], k);
            compat = compat.max(0.5 * l1_raw(&pushed, marginals[j].weights()));
        }
    }

    let step_gaps = grid
        .windows(2)
        .zip(tab.transfer())
        .map(|(w, &m)| Ok(m - path_total_variation(path, w[0], w[1])?))
        .collect::<Result<Vec<f64>>>()?;
    let total_transfer: f64 = tab.transfer().iter().sum();
    let path_variation = path_total_variation(path, first, last)?;
    let minimality_gap = (total_transfer - path_variation).abs();

    let mut report = SemigroupReport {
        tol,
        cocycle_residual: cocycle,
        compatibility_residual: compat,
        minimality_gap,
        total_transfer,
        path_variation,
        step_gaps,
        subadditivity_violations: violations,
        passed: false,
    };
    report.passed = report.failures().is_empty();
    Ok(report)
}

/// Largest entrywise `|Q̂_{r,t}(i,·) − (Q̂_{r,s}Q̂_{s,t})(i,·)|` over probe
/// triples of `times`, on rows `i` occupied at `r`.
///
/// Unlike a factor-product table, directly estimated transition matrices
/// need not compose exactly at finite `n`: two sites with the same color at
/// `s` may have different colors at `r`. The residual shrinks like `n^{-1/2}`
/// when the coordinates are Markov.
pub fn empirical_cocycle_residual(e: &EnsemblePath, times: &[f64]) -> Result<f64> {
    let k = e.k();
    let probes = probe_indices(times.len());
    let support = crate::projection::occupancy(e, times)?;
    let mut worst: f64 = 0.0;
    for (a, &r) in probes.iter().enumerate() {
        for (b, &s) in probes.iter().enumerate().skip(a + 1) {
            let q_rs = estimate_transition(e, times[r], times[s])?;
            for &t in &probes[b + 1..] {
                let q_rt = estimate_transition(e, times[r], times[t])?;
                let q_st = estimate_transition(e, times[s], times[t])?;
                let composed = matmul(q_rs.entries(), q_st.entries(), k);
                for i in (0..k).filter(|&i| support[r][i] > 0) {
                    for j in 0..k {
                        worst = worst.max((q_rt.get(i, j) - composed[i * k + j]).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::FlipEvent;
    use crate::semigroup::{build_minimal_semigroup, Origin};
    use crate::simplex::StochasticMatrix;

    fn pt(w: &[f64]) -> SimplexPoint {
        SimplexPoint::new(w.to_vec()).unwrap()
    }

    #[test]
    fn built_linear_table_passes() {
        let lin = SimplexPath::linear(pt(&[0.8, 0.2]), pt(&[0.2, 0.8]), 1.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let tab = build_minimal_semigroup(&lin, &grid).unwrap();
        let rep = check_semigroup(&tab, &lin, 1e-6).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.compatibility_residual <= 1e-8);
    }

    #[test]
    fn identity_table_on_constant_path_is_clean() {
        let c = SimplexPath::constant(pt(&[0.25, 0.75]), 2.0).unwrap();
        let id = StochasticMatrix::identity(2).unwrap();
        let tab = SemigroupTable::new(
            vec![0.0, 1.0, 2.0],
            vec![id.clone(), id],
            vec![0.0, 0.0],
            Origin::ConstructedFromPath,
        )
        .unwrap();
        let rep = check_semigroup(&tab, &c, 0.0).unwrap();
        assert_eq!(rep.cocycle_residual, 0.0);
        assert_eq!(rep.compatibility_residual, 0.0);
        assert_eq!(rep.minimality_gap, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn full_recoloring_overpays_by_two_ninths_per_jump() {
        // ones fraction 2/3 -> 1/3 -> 2/3
        let path = SimplexPath::step(
            vec![
                (0.0, pt(&[1.0 / 3.0, 2.0 / 3.0])),
                (0.5, pt(&[2.0 / 3.0, 1.0 / 3.0])),
                (1.5, pt(&[1.0 / 3.0, 2.0 / 3.0])),
            ],
            2.0,
        )
        .unwrap();
        let down =
            StochasticMatrix::from_rows(&[vec![2.0 / 3.0, 1.0 / 3.0], vec![2.0 / 3.0, 1.0 / 3.0]])
                .unwrap();
        let up =
            StochasticMatrix::from_rows(&[vec![1.0 / 3.0, 2.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]])
                .unwrap();
        let grid = vec![0.0, 1.0, 2.0];
        let tab = SemigroupTable::from_factors_on_path(
            grid,
            vec![down, up],
            &path,
            Origin::ConstructedFromPath,
        )
        .unwrap();
        let rep = check_semigroup(&tab, &path, 1e-9).unwrap();
        assert!(rep.compatibility_residual < 1e-12);
        assert!((rep.step_gaps[0] - 2.0 / 9.0).abs() < 1e-12);
        assert!((rep.step_gaps[1] - 2.0 / 9.0).abs() < 1e-12);
        assert_eq!(rep.failures(), vec!["minimality_gap"]);
    }

    #[test]
    fn broken_factor_is_named() {
        let lin = SimplexPath::linear(pt(&[0.8, 0.2]), pt(&[0.2, 0.8]), 1.0).unwrap();
        let tab = build_minimal_semigroup(&lin, &[0.0, 0.5, 1.0]).unwrap();
        let mut factors = tab.factors().to_vec();
        factors[1] = StochasticMatrix::identity(2).unwrap();
        let bad = SemigroupTable::new(
            tab.grid().to_vec(),
            factors,
            tab.transfer().to_vec(),
            tab.origin(),
        )
        .unwrap();
        let rep = check_semigroup(&bad, &lin, 1e-6).unwrap();
        assert!(rep.failures().contains(&"compatibility_residual"));
        assert!(!rep.passed);
    }

    #[test]
    fn empirical_matrices_need_not_compose() {
        // site 0 stays at 0; site 1 goes 1 -> 0 -> 1
        let e = EnsemblePath::new(
            2,
            3.0,
            0,
            vec![0, 1],
            vec![
                FlipEvent {
                    t: 1.0,
                    site: 1,
                    from: 1,
                    to: 0,
                },
                FlipEvent {
                    t: 2.0,
                    site: 1,
                    from: 0,
                    to: 1,
                },
            ],
        )
        .unwrap();
        let r = empirical_cocycle_residual(&e, &[0.5, 1.5, 2.5]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
    }
}
