//! Probability vectors on `[k]`, stochastic and generator matrices, and the
//! matrix exponential that connects them.
//!
//! Matrices are small (`k <= 64`) and stored dense, row-major. Probability
//! vectors act on matrices from the left: `y · Q`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of colors.
pub const MAX_COLORS: usize = 64;

/// Raw sums may drift by this much before construction refuses to renormalize.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// Entries this far below zero are treated as rounding and clamped.
const NEGATIVE_SLACK: f64 = 1e-12;

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > MAX_COLORS {
        return Err(Error::InvalidArgument(format!(
            "color count {k} outside 1..={MAX_COLORS}"
        )));
    }
    Ok(())
}

/// Clamp rounding-level negatives and rescale a nonnegative vector to sum 1.
fn normalize_probabilities(w: &mut [f64], what: &str) -> std::result::Result<(), String> {
    for x in w.iter_mut() {
        if !x.is_finite() {
            return Err(format!("{what}: non-finite entry"));
        }
        if *x < 0.0 {
            if *x < -NEGATIVE_SLACK {
                return Err(format!("{what}: negative entry {x}"));
            }
            *x = 0.0;
        }
    }
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() >= RENORMALIZE_TOL {
        return Err(format!("{what}: entries sum to {sum}"));
    }
    if sum != 1.0 {
        for x in w.iter_mut() {
            *x /= sum;
        }
    }
    Ok(())
}

/// A probability vector on `k` colors.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    /// Validates and, when the raw sum is within `1e-9` of one, renormalizes.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        check_k(weights.len())?;
        let mut weights = weights;
        normalize_probabilities(&mut weights, "simplex point").map_err(Error::NotSimplex)?;
        Ok(SimplexPoint { weights })
    }

    /// Point mass on `color`.
    pub fn vertex(k: usize, color: usize) -> Result<Self> {
        check_k(k)?;
        if color >= k {
            return Err(Error::Dimension {
                expected: k,
                got: color + 1,
            });
        }
        let mut w = vec![0.0; k];
        w[color] = 1.0;
        Ok(SimplexPoint { weights: w })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(SimplexPoint {
            weights: vec![1.0 / k as f64; k],
        })
    }

    /// Occupancy fractions `counts[i] / total`.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::NotSimplex("all counts are zero".into()));
        }
        Self::new(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// `self · q`, renormalized onto the simplex.
    pub fn act(&self, q: &StochasticMatrix) -> Result<SimplexPoint> {
        SimplexPoint::new(self.act_raw(q)?)
    }

    /// `self · q` without renormalization.
    pub fn act_raw(&self, q: &StochasticMatrix) -> Result<Vec<f64>> {
        same_k(self.k(), q.k())?;
        Ok(row_times(&self.weights, q.entries(), q.k()))
    }

    /// Convex combination `(1 - s) · self + s · other`.
    pub fn lerp(&self, other: &SimplexPoint, s: f64) -> Result<SimplexPoint> {
        same_k(self.k(), other.k())?;
        SimplexPoint::new(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        )
    }
}

impl<'de> Deserialize<'de> for SimplexPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        SimplexPoint::new(w).map_err(serde::de::Error::custom)
    }
}

fn same_k(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Dimension {
            expected: a,
            got: b,
        });
    }
    Ok(())
}

/// Half the L1 distance: the total-variation distance between two laws on `[k]`.
pub fn tv_distance(a: &SimplexPoint, b: &SimplexPoint) -> Result<f64> {
    same_k(a.k(), b.k())?;
    Ok(0.5 * l1_raw(a.weights(), b.weights()))
}

/// Plain L1 distance `Σ|aᵢ − bᵢ|`.
pub fn l1_distance(a: &SimplexPoint, b: &SimplexPoint) -> Result<f64> {
    same_k(a.k(), b.k())?;
    Ok(l1_raw(a.weights(), b.weights()))
}

pub(crate) fn l1_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn row_times(y: &[f64], m: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        let row = &m[i * k..(i + 1) * k];
        for (o, &q) in out.iter_mut().zip(row) {
            *o += yi * q;
        }
    }
    out
}

pub(crate) fn matmul(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k * k];
    for i in 0..k {
        for l in 0..k {
            let ail = a[i * k + l];
            if ail == 0.0 {
                continue;
            }
            for j in 0..k {
                out[i * k + j] += ail * b[l * k + j];
            }
        }
    }
    out
}

pub(crate) fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

fn infer_k(len: usize) -> Result<usize> {
    let k = (len as f64).sqrt().round() as usize;
    if k * k != len {
        return Err(Error::InvalidArgument(format!(
            "{len} entries do not form a square matrix"
        )));
    }
    check_k(k)?;
    Ok(k)
}

/// A `k × k` row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    /// Row-major entries; rows within `1e-9` of summing to one are renormalized.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let k = infer_k(entries.len())?;
        let mut entries = entries;
        for i in 0..k {
            normalize_probabilities(&mut entries[i * k..(i + 1) * k], &format!("row {i}"))
                .map_err(Error::NotStochastic)?;
        }
        Ok(StochasticMatrix { k, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::NotStochastic("rows of unequal length".into()));
        }
        Self::new(rows.concat())
    }

    pub fn identity(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(StochasticMatrix {
            k,
            entries: identity(k),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    /// `self · other`.
    pub fn compose(&self, other: &StochasticMatrix) -> Result<StochasticMatrix> {
        same_k(self.k, other.k)?;
        StochasticMatrix::new(matmul(&self.entries, &other.entries, self.k))
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &StochasticMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Fraction of mass that changes color when `y` is pushed through `self`:
    /// `Σ_{a≠b} y_a Q(a, b)`.
    pub fn mass_transfer(&self, y: &SimplexPoint) -> Result<f64> {
        same_k(self.k, y.k())?;
        Ok((0..self.k).map(|a| y.get(a) * (1.0 - self.get(a, a))).sum())
    }
}

impl Serialize for StochasticMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for StochasticMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        StochasticMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// A `k × k` rate matrix: nonnegative off-diagonal, zero row sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorMatrix {
    k: usize,
    entries: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        let k = infer_k(entries.len())?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("generator matrix"));
        }
        for i in 0..k {
            let row = &entries[i * k..(i + 1) * k];
            let mut scale: f64 = 0.0;
            for (j, &r) in row.iter().enumerate() {
                if j != i && r < 0.0 {
                    return Err(Error::NotGenerator(format!(
                        "negative off-diagonal entry ({i},{j}) = {r}"
                    )));
                }
                scale = scale.max(r.abs());
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::NotGenerator(format!("row {i} sums to {sum}")));
            }
        }
        Ok(GeneratorMatrix { k, entries })
    }

    /// Builds from off-diagonal rates; the diagonal is filled in.
    pub fn from_rates(k: usize, rates: &[f64]) -> Result<Self> {
        check_k(k)?;
        if rates.len() != k * k {
            return Err(Error::Dimension {
                expected: k * k,
                got: rates.len(),
            });
        }
        let mut e = rates.to_vec();
        for i in 0..k {
            e[i * k + i] = 0.0;
            let out: f64 = (0..k).filter(|&j| j != i).map(|j| e[i * k + j]).sum();
            e[i * k + i] = -out;
        }
        Self::new(e)
    }

    pub fn zero(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(GeneratorMatrix {
            k,
            entries: vec![0.0; k * k],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    /// `y · R`.
    pub fn left_apply(&self, y: &[f64]) -> Vec<f64> {
        row_times(y, &self.entries, self.k)
    }
}

/// `exp(Δ·R)` by scaling and squaring with a Taylor kernel.
pub fn matrix_exp(r: &GeneratorMatrix, delta: f64) -> Result<StochasticMatrix> {
    if !delta.is_finite() {
        return Err(Error::NonFinite("time step"));
    }
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "negative time step {delta}"
        )));
    }
    let k = r.k();
    let a: Vec<f64> = r.entries().iter().map(|x| x * delta).collect();
    let mut e = expm(&a, k);
    for x in e.iter_mut() {
        if *x < 0.0 && *x > -NEGATIVE_SLACK {
            *x = 0.0;
        }
    }
    StochasticMatrix::new(e)
}

/// Dense matrix exponential of an arbitrary `k × k` matrix.
pub(crate) fn expm(a: &[f64], k: usize) -> Vec<f64> {
    // max absolute row sum
    let norm = a
        .chunks(k)
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5_f64.powi(squarings);
    let scaled: Vec<f64> = a.iter().map(|x| x * scale).collect();

    // With ‖A‖ ≤ 1/2 the degree-18 remainder is below 1e-22.
    let mut result = identity(k);
    let mut term = identity(k);
    for n in 1..=18 {
        term = matmul(&term, &scaled, k);
        let inv = 1.0 / n as f64;
        term.iter_mut().for_each(|x| *x *= inv);
        result.iter_mut().zip(&term).for_each(|(r, t)| *r += t);
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, k);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(w: &[f64]) -> SimplexPoint {
        SimplexPoint::new(w.to_vec()).unwrap()
    }

    #[test]
    fn construction_renormalizes_small_drift_and_rejects_large() {
        let p = pt(&[0.5 + 1e-11, 0.5]);
        assert!((p.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(SimplexPoint::new(vec![0.6, 0.5]).is_err());
        assert!(SimplexPoint::new(vec![1.1, -0.1]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
    }

    #[test]
    fn tv_distance_examples() {
        assert_eq!(
            tv_distance(&pt(&[0.3, 0.7]), &pt(&[0.3, 0.7])).unwrap(),
            0.0
        );
        assert_eq!(
            tv_distance(&pt(&[1.0, 0.0]), &pt(&[0.0, 1.0])).unwrap(),
            1.0
        );
        let d = tv_distance(&pt(&[0.5, 0.5]), &pt(&[0.25, 0.75])).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
        assert!(tv_distance(&pt(&[1.0]), &pt(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn exp_at_zero_is_identity() {
        let r = GeneratorMatrix::from_rates(3, &[0., 1., 2., 3., 0., 1., 0.5, 0.5, 0.]).unwrap();
        let q = matrix_exp(&r, 0.0).unwrap();
        assert_eq!(q, StochasticMatrix::identity(3).unwrap());
    }

    #[test]
    fn exp_matches_two_state_closed_form() {
        let r = GeneratorMatrix::new(vec![-1.0, 1.0, 1.0, -1.0]).unwrap();
        for &t in &[0.1, 0.5, 1.0, 3.0, 20.0] {
            let q = matrix_exp(&r, t).unwrap();
            let stay = (1.0 + (-2.0 * t).exp()) / 2.0;
            let flip = (1.0 - (-2.0 * t).exp()) / 2.0;
            for (got, want) in q.entries().iter().zip([stay, flip, flip, stay]) {
                assert!(
                    (got - want).abs() <= 1e-10 * want.max(1e-300) + 1e-15,
                    "t={t}"
                );
            }
        }
        let r = GeneratorMatrix::new(vec![-1.0, 1.0, 0.0, 0.0]).unwrap();
        let q = matrix_exp(&r, 2f64.ln()).unwrap();
        let want = [0.5, 0.5, 0.0, 1.0];
        for (got, w) in q.entries().iter().zip(want) {
            assert!((got - w).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_handles_large_generators() {
        let r = GeneratorMatrix::new(vec![-700.0, 700.0, 0.0, 0.0]).unwrap();
        let q = matrix_exp(&r, 1.0).unwrap();
        assert!(q.get(0, 0) >= 0.0 && q.get(0, 0) < 1e-300);
        assert!((q.get(0, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generator_validation() {
        assert!(GeneratorMatrix::new(vec![-1.0, 1.0, 0.5, -0.4]).is_err());
        assert!(GeneratorMatrix::new(vec![1.0, -1.0, 0.0, 0.0]).is_err());
        assert!(GeneratorMatrix::new(vec![-1.0, 1.0, 0.0]).is_err());
        assert!(matrix_exp(&GeneratorMatrix::zero(2).unwrap(), f64::INFINITY).is_err());
    }

    #[test]
    fn mass_transfer_of_identity_is_zero() {
        let q = StochasticMatrix::identity(3).unwrap();
        assert_eq!(q.mass_transfer(&pt(&[0.2, 0.3, 0.5])).unwrap(), 0.0);
        let q = StochasticMatrix::new(vec![0.5, 0.5, 0.0, 1.0]).unwrap();
        assert!((q.mass_transfer(&pt(&[0.5, 0.5])).unwrap() - 0.25).abs() < 1e-15);
    }

    fn simplex_strategy(k: usize) -> impl Strategy<Value = SimplexPoint> {
        prop::collection::vec(0.0f64..1.0, k).prop_filter_map("degenerate", |w| {
            let s: f64 = w.iter().sum();
            (s > 1e-6).then(|| SimplexPoint::new(w.iter().map(|x| x / s).collect()).unwrap())
        })
    }

    fn stochastic_strategy(k: usize) -> impl Strategy<Value = StochasticMatrix> {
        prop::collection::vec(simplex_strategy(k), k).prop_map(|rows| {
            StochasticMatrix::from_rows(
                &rows
                    .iter()
                    .map(|r| r.weights().to_vec())
                    .collect::<Vec<_>>(),
            )
            .unwrap()
        })
    }

    fn generator_strategy(k: usize) -> impl Strategy<Value = GeneratorMatrix> {
        prop::collection::vec(0.0f64..3.0, k * k)
            .prop_map(move |r| GeneratorMatrix::from_rates(k, &r).unwrap())
    }

    proptest! {
        #[test]
        fn action_stays_on_simplex(y in simplex_strategy(4), q in stochastic_strategy(4)) {
            let out = y.act(&q).unwrap();
            prop_assert!(out.weights().iter().all(|&x| x >= 0.0));
            prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn exp_is_a_one_parameter_semigroup(
            r in generator_strategy(3), d1 in 0.0f64..2.0, d2 in 0.0f64..2.0
        ) {
            let lhs = matrix_exp(&r, d1).unwrap().compose(&matrix_exp(&r, d2).unwrap()).unwrap();
            let rhs = matrix_exp(&r, d1 + d2).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9);
        }

        #[test]
        fn tv_triangle_inequality(
            a in simplex_strategy(5), b in simplex_strategy(5), c in simplex_strategy(5)
        ) {
            let ab = tv_distance(&a, &b).unwrap();
            let bc = tv_distance(&b, &c).unwrap();
            let ac = tv_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-15);
            prop_assert!((0.0..=1.0 + 1e-15).contains(&ab));
            prop_assert_eq!(ab, tv_distance(&b, &a).unwrap());
        }
    }
}
