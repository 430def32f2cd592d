//! Empirical statistics of an ensemble: frequency projection, transition
//! matrices, mass transfer and the jump classifier.
//!
//! Everything is computed from integer counts. Floating point only appears
//! when a ratio is emitted, so identities between counts (for example that
//! the column sums of the transition counts reproduce the later occupancy)
//! hold exactly.

use serde::Serialize;

use crate::ensemble::{counts_of, EnsemblePath};
use crate::error::{Error, Result};
use crate::path::SimplexPath;
use crate::simplex::{SimplexPoint, StochasticMatrix};

/// Default fraction of sites that must flip together for a type-II jump.
pub const DEFAULT_THETA: f64 = 0.05;

/// Occupancy counts at each requested time, in request order.
pub fn occupancy(e: &EnsemblePath, times: &[f64]) -> Result<Vec<Vec<u64>>> {
    for &t in times {
        e.check_time(t)?;
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut counts = counts_of(e.initial(), e.k());
    let events = e.events();
    let mut next = 0;
    let mut out = vec![Vec::new(); times.len()];
    for idx in order {
        while next < events.len() && events[next].t <= times[idx] {
            counts[events[next].from] -= 1;
            counts[events[next].to] += 1;
            next += 1;
        }
        out[idx] = counts.clone();
    }
    Ok(out)
}

/// Empirical frequencies `Y_t` at each requested time.
pub fn project_points(e: &EnsemblePath, times: &[f64]) -> Result<Vec<SimplexPoint>> {
    occupancy(e, times)?
        .iter()
        .map(|c| SimplexPoint::from_counts(c))
        .collect()
}

/// The projection as a right-continuous step path sampled at `0` and `times`.
pub fn project(e: &EnsemblePath, times: &[f64]) -> Result<SimplexPath> {
    let mut ts: Vec<f64> = times.to_vec();
    ts.push(0.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let points = project_points(e, &ts)?;
    if e.horizon() == 0.0 {
        return Err(Error::InvalidArgument("ensemble has zero horizon".into()));
    }
    SimplexPath::step(ts.into_iter().zip(points).collect(), e.horizon())
}

/// Pair counts `#{m : X^m_s = i, X^m_t = j}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransitionCounts {
    k: usize,
    counts: Vec<u64>,
}

impl TransitionCounts {
    pub fn between(before: &[usize], after: &[usize], k: usize) -> Result<Self> {
        if before.len() != after.len() {
            return Err(Error::Dimension {
                expected: before.len(),
                got: after.len(),
            });
        }
        let mut counts = vec![0u64; k * k];
        for (&a, &b) in before.iter().zip(after) {
            counts[a * k + b] += 1;
        }
        Ok(TransitionCounts { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.k + j]
    }

    /// Sites holding color `i` at the earlier time.
    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i * self.k..(i + 1) * self.k].iter().sum()
    }

    pub fn earlier_occupancy(&self) -> Vec<u64> {
        (0..self.k).map(|i| self.row_total(i)).collect()
    }

    pub fn later_occupancy(&self) -> Vec<u64> {
        (0..self.k)
            .map(|j| (0..self.k).map(|i| self.get(i, j)).sum())
            .collect()
    }

    /// Sites whose color differs between the two times.
    pub fn changed(&self) -> u64 {
        (0..self.k)
            .map(|i| self.row_total(i) - self.get(i, i))
            .sum()
    }

    /// Conditional frequencies; rows without support are `δ_i`.
    pub fn to_matrix(&self) -> StochasticMatrix {
        let k = self.k;
        let mut m = vec![0.0; k * k];
        for i in 0..k {
            let total = self.row_total(i);
            if total == 0 {
                m[i * k + i] = 1.0;
            } else {
                for j in 0..k {
                    m[i * k + j] = self.get(i, j) as f64 / total as f64;
                }
            }
        }
        StochasticMatrix::new(m).expect("count ratios form a stochastic matrix")
    }
}

fn check_order(s: f64, t: f64) -> Result<()> {
    if s > t {
        return Err(Error::InvalidArgument(format!("s = {s} exceeds t = {t}")));
    }
    Ok(())
}

pub fn transition_counts(e: &EnsemblePath, s: f64, t: f64) -> Result<TransitionCounts> {
    check_order(s, t)?;
    TransitionCounts::between(&e.colors_at(s)?, &e.colors_at(t)?, e.k())
}

/// `Q̂_{s,t}`: row `i` is the empirical law at `t` of sites holding `i` at `s`.
pub fn estimate_transition(e: &EnsemblePath, s: f64, t: f64) -> Result<StochasticMatrix> {
    Ok(transition_counts(e, s, t)?.to_matrix())
}

/// Fraction of sites whose colors at `s` and `t` differ.
pub fn mass_transfer(e: &EnsemblePath, s: f64, t: f64) -> Result<f64> {
    Ok(transition_counts(e, s, t)?.changed() as f64 / e.n() as f64)
}

/// Per-step empirical transition matrices on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalSemigroup {
    pub grid: Vec<f64>,
    pub factors: Vec<StochasticMatrix>,
    pub counts: Vec<TransitionCounts>,
    pub marginals: Vec<SimplexPoint>,
    /// `support_mask[g][i]`: color `i` is occupied at grid time `g`.
    pub support_mask: Vec<Vec<bool>>,
    occupancy: Vec<Vec<u64>>,
}

impl EmpiricalSemigroup {
    pub fn estimate(e: &EnsemblePath, grid: &[f64]) -> Result<Self> {
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid.is_empty() {
            return Err(Error::InvalidArgument(
                "grid must be strictly increasing".into(),
            ));
        }
        let snapshots = grid
            .iter()
            .map(|&t| e.colors_at(t))
            .collect::<Result<Vec<_>>>()?;
        let occupancy: Vec<Vec<u64>> = snapshots.iter().map(|c| counts_of(c, e.k())).collect();
        let counts = snapshots
            .windows(2)
            .map(|w| TransitionCounts::between(&w[0], &w[1], e.k()))
            .collect::<Result<Vec<_>>>()?;
        let marginals = occupancy
            .iter()
            .map(|c| SimplexPoint::from_counts(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmpiricalSemigroup {
            grid: grid.to_vec(),
            factors: counts.iter().map(|c| c.to_matrix()).collect(),
            support_mask: occupancy
                .iter()
                .map(|c| c.iter().map(|&x| x > 0).collect())
                .collect(),
            counts,
            marginals,
            occupancy,
        })
    }

    /// Every step's counts reproduce both neighbouring occupancies exactly.
    pub fn marginals_consistent(&self) -> bool {
        self.counts.iter().enumerate().all(|(g, c)| {
            c.earlier_occupancy() == self.occupancy[g]
                && c.later_occupancy() == self.occupancy[g + 1]
        })
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind")]
pub enum Discontinuity {
    /// A single site flips.
    TypeI { t: f64, site: usize },
    /// Several sites flip together, but fewer than `θ·n`: a finite-`n`
    /// artifact rather than a collective jump.
    TypeIMultiple {
        t: f64,
        sites: Vec<usize>,
        warning: String,
    },
    /// At least `θ·n` sites flip together.
    TypeII {
        t: f64,
        flipped: usize,
        jump: StochasticMatrix,
        counts: TransitionCounts,
        pre: SimplexPoint,
        post: SimplexPoint,
    },
}

impl Discontinuity {
    pub fn time(&self) -> f64 {
        match self {
            Discontinuity::TypeI { t, .. }
            | Discontinuity::TypeIMultiple { t, .. }
            | Discontinuity::TypeII { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiscontinuityReport {
    pub theta: f64,
    pub entries: Vec<Discontinuity>,
}

impl DiscontinuityReport {
    pub fn type_ii(&self) -> impl Iterator<Item = &Discontinuity> {
        self.entries
            .iter()
            .filter(|d| matches!(d, Discontinuity::TypeII { .. }))
    }
}

/// Groups flips by time and labels each instant.
pub fn classify_discontinuities(e: &EnsemblePath, theta: f64) -> Result<DiscontinuityReport> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "θ = {theta} outside (0, 1]"
        )));
    }
    let threshold = theta * e.n() as f64;
    let events = e.events();
    let mut colors = e.initial().to_vec();
    let mut entries = Vec::new();
    let mut start = 0;
    while start < events.len() {
        let t = events[start].t;
        let end = start + events[start..].partition_point(|ev| ev.t == t);
        let group = &events[start..end];
        let before = colors.clone();
        for ev in group {
            colors[ev.site] = ev.to;
        }
        let flipped = group.len();
        let entry = if flipped as f64 >= threshold {
            let counts = TransitionCounts::between(&before, &colors, e.k())?;
            Discontinuity::TypeII {
                t,
                flipped,
                jump: counts.to_matrix(),
                pre: SimplexPoint::from_counts(&counts.earlier_occupancy())?,
                post: SimplexPoint::from_counts(&counts.later_occupancy())?,
                counts,
            }
        } else if flipped == 1 {
            Discontinuity::TypeI {
                t,
                site: group[0].site,
            }
        } else {
            Discontinuity::TypeIMultiple {
                t,
                sites: group.iter().map(|ev| ev.site).collect(),
                warning: format!(
                    "{flipped} simultaneous flips, below θ·n = {threshold}; ambiguous at finite n"
                ),
            }
        };
        entries.push(entry);
        start = end;
    }
    Ok(DiscontinuityReport { theta, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::FlipEvent;

    fn ev(t: f64, site: usize, from: usize, to: usize) -> FlipEvent {
        FlipEvent { t, site, from, to }
    }

    /// Four sites with (s, t) color pairs (0,0), (0,1), (1,1), (0,0).
    fn four_sites() -> EnsemblePath {
        EnsemblePath::new(2, 1.0, 0, vec![0, 0, 1, 0], vec![ev(0.5, 1, 0, 1)]).unwrap()
    }

    #[test]
    fn projection_counts() {
        let e = EnsemblePath::new(2, 1.0, 0, vec![0, 0, 0, 1], vec![]).unwrap();
        let y = project_points(&e, &[0.3, 0.9]).unwrap();
        assert_eq!(y[0].weights(), &[0.75, 0.25]);
        assert_eq!(y[0], y[1]);
        let p = project(&e, &[0.5]).unwrap();
        assert_eq!(p.eval(1.0).unwrap().weights(), &[0.75, 0.25]);
        assert!(project_points(&e, &[1.5]).is_err());
    }

    #[test]
    fn transition_estimates() {
        let e = four_sites();
        let q = estimate_transition(&e, 0.0, 1.0).unwrap();
        assert_eq!(q.rows(), vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![0.0, 1.0]]);
        assert_eq!(
            estimate_transition(&e, 0.7, 0.7).unwrap(),
            StochasticMatrix::identity(2).unwrap()
        );
        assert!(estimate_transition(&e, 0.7, 0.2).is_err());

        let none_of_one = EnsemblePath::new(2, 1.0, 0, vec![0, 0], vec![ev(0.5, 0, 0, 1)]).unwrap();
        let q = estimate_transition(&none_of_one, 0.0, 1.0).unwrap();
        assert_eq!(q.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn mass_transfer_examples() {
        let e = four_sites();
        assert_eq!(mass_transfer(&e, 0.4, 0.4).unwrap(), 0.0);
        assert_eq!(mass_transfer(&e, 0.0, 1.0).unwrap(), 0.25);
        // a site that flips out and back counts at no time pair spanning both flips
        let back = EnsemblePath::new(
            2,
            1.0,
            0,
            vec![0, 1],
            vec![ev(0.2, 0, 0, 1), ev(0.6, 0, 1, 0)],
        )
        .unwrap();
        let (r, s, t) = (0.0, 0.5, 1.0);
        let whole = mass_transfer(&back, r, t).unwrap();
        let split = mass_transfer(&back, r, s).unwrap() + mass_transfer(&back, s, t).unwrap();
        assert!(whole <= split);
        assert_eq!(whole, 0.0);
    }

    #[test]
    fn classifier_separates_kinds() {
        let e = EnsemblePath::new(
            2,
            1.0,
            0,
            vec![0; 10],
            vec![
                ev(0.1, 3, 0, 1),
                ev(0.2, 1, 0, 1),
                ev(0.2, 2, 0, 1),
                ev(0.5, 4, 0, 1),
                ev(0.5, 5, 0, 1),
                ev(0.5, 6, 0, 1),
                ev(0.5, 7, 0, 1),
            ],
        )
        .unwrap();
        let r = classify_discontinuities(&e, 0.3).unwrap();
        assert!(matches!(r.entries[0], Discontinuity::TypeI { site: 3, .. }));
        assert!(matches!(r.entries[1], Discontinuity::TypeIMultiple { .. }));
        match &r.entries[2] {
            Discontinuity::TypeII {
                jump, pre, post, ..
            } => {
                assert_eq!(pre.weights(), &[0.7, 0.3]);
                assert_eq!(post.weights(), &[0.3, 0.7]);
                assert_eq!(jump.row(0), &[3.0 / 7.0, 4.0 / 7.0]);
                assert_eq!(jump.row(1), &[0.0, 1.0]);
            }
            other => panic!("expected type II, got {other:?}"),
        }
        let constant = EnsemblePath::new(2, 1.0, 0, vec![0, 1], vec![]).unwrap();
        assert!(classify_discontinuities(&constant, 0.05)
            .unwrap()
            .entries
            .is_empty());
        assert!(classify_discontinuities(&constant, 0.0).is_err());
    }

    #[test]
    fn empirical_semigroup_is_consistent() {
        let e = four_sites();
        let s = EmpiricalSemigroup::estimate(&e, &[0.0, 0.5, 1.0]).unwrap();
        assert!(s.marginals_consistent());
        assert_eq!(s.support_mask[0], vec![true, true]);
        assert_eq!(s.factors.len(), 2);
    }
}
