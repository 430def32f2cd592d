use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::simplex::GeneratorMatrix;

type RateFn = dyn Fn(usize, usize, &[f64]) -> f64 + Send + Sync;

/// Relative slack when comparing a rate against its declared supremum.
const BOUND_SLACK: f64 = 1e-12;

/// The family of flip rates `f_{i,j}(y)` of a mean-field model, with a
/// declared per-pair upper bound `λ_{i,j}` used for thinning.
#[derive(Clone)]
pub struct RateField {
    k: usize,
    rate: Arc<RateFn>,
    sup: Vec<f64>,
    lipschitz: f64,
    label: String,
}

impl fmt::Debug for RateField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateField")
            .field("label", &self.label)
            .field("k", &self.k)
            .field("sup", &self.sup)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl RateField {
    /// `sup` is row-major `k × k`; diagonal entries are ignored.
    pub fn new<F>(k: usize, rate: F, sup: Vec<f64>, lipschitz: f64, label: &str) -> Result<Self>
    where
        F: Fn(usize, usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if k == 0 {
            return Err(Error::InvalidArgument("rate field with k = 0".into()));
        }
        if sup.len() != k * k {
            return Err(Error::Dimension {
                expected: k * k,
                got: sup.len(),
            });
        }
        if sup.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument(
                "rate bounds must be finite and nonnegative".into(),
            ));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::InvalidArgument("bad Lipschitz bound".into()));
        }
        let mut sup = sup;
        for i in 0..k {
            sup[i * k + i] = 0.0;
        }
        Ok(RateField {
            k,
            rate: Arc::new(rate),
            sup,
            lipschitz,
            label: label.to_string(),
        })
    }

    /// Estimates `λ_{i,j}` as the maximum over the simplex lattice with
    /// spacing `1/resolution`, inflated by 10% to cover off-lattice points.
    pub fn with_grid_sup<F>(
        k: usize,
        rate: F,
        lipschitz: f64,
        resolution: usize,
        label: &str,
    ) -> Result<Self>
    where
        F: Fn(usize, usize, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if k == 0 || resolution == 0 {
            return Err(Error::InvalidArgument("empty lattice".into()));
        }
        let mut sup = vec![0.0f64; k * k];
        let mut counts = vec![0usize; k];
        let mut visit = |y: &[f64]| {
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        let v = rate(i, j, y);
                        if v.is_finite() {
                            sup[i * k + j] = sup[i * k + j].max(v);
                        }
                    }
                }
            }
        };
        lattice(&mut counts, 0, resolution, &mut |c| {
            let y: Vec<f64> = c.iter().map(|&x| x as f64 / resolution as f64).collect();
            visit(&y);
        });
        sup.iter_mut().for_each(|s| *s *= 1.1);
        Self::new(k, rate, sup, lipschitz, label)
    }

    /// Rates that do not depend on `y`; `rates` is row-major `k × k`.
    pub fn constant(k: usize, rates: &[f64]) -> Result<Self> {
        if rates.len() != k * k {
            return Err(Error::Dimension {
                expected: k * k,
                got: rates.len(),
            });
        }
        let table = rates.to_vec();
        let f = move |i: usize, j: usize, _: &[f64]| table[i * k + j];
        Self::new(k, f, rates.to_vec(), 0.0, "constant")
    }

    pub fn zero(k: usize) -> Result<Self> {
        Self::constant(k, &vec![0.0; k * k])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Declared bound `λ_{i,j}`.
    pub fn sup(&self, i: usize, j: usize) -> f64 {
        self.sup[i * self.k + j]
    }

    /// `f_{i,j}(y)`, checked against `0 ≤ f ≤ λ_{i,j}`.
    pub fn rate(&self, i: usize, j: usize, y: &[f64]) -> Result<f64> {
        if i == j {
            return Ok(0.0);
        }
        let value = (self.rate)(i, j, y);
        let bound = self.sup(i, j);
        if !value.is_finite() || value < 0.0 || value > bound * (1.0 + BOUND_SLACK) {
            return Err(Error::RateBound {
                i,
                j,
                y: y.to_vec(),
                value,
                bound,
            });
        }
        Ok(value)
    }

    /// Generator of a single site when the population sits at `y`.
    pub fn generator_at(&self, y: &[f64]) -> Result<GeneratorMatrix> {
        let k = self.k;
        let mut rates = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                rates[i * k + j] = self.rate(i, j, y)?;
            }
        }
        GeneratorMatrix::from_rates(k, &rates)
    }

    /// Fluid-limit vector field:
    /// `dyʲ/dt = Σ_{i≠j} f_{i,j}(y) yⁱ − yʲ Σ_{j'≠j} f_{j,j'}(y)`.
    pub fn drift(&self, y: &[f64]) -> Result<Vec<f64>> {
        let k = self.k;
        if y.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: y.len(),
            });
        }
        let mut out = vec![0.0; k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let flux = self.rate(i, j, y)? * y[i];
                out[j] += flux;
                out[i] -= flux;
            }
        }
        Ok(out)
    }

    /// The generator, if the field is constant: rates evaluated at three
    /// random simplex points must agree to `1e-12`.
    pub fn constant_generator(&self) -> Result<GeneratorMatrix> {
        let k = self.k;
        let mut rng = rng::stream(0x5eed_c0de, 0);
        let points: Vec<Vec<f64>> = (0..3)
            .map(|_| {
                let raw: Vec<f64> = (0..k)
                    .map(|_| -rng.random::<f64>().max(1e-300).ln())
                    .collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        let reference = self.generator_at(&points[0])?;
        for y in &points[1..] {
            let other = self.generator_at(y)?;
            let gap = reference
                .entries()
                .iter()
                .zip(other.entries())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > 1e-12 {
                return Err(Error::NotConstant(format!(
                    "rates differ by {gap} between {:?} and {y:?}",
                    points[0]
                )));
            }
        }
        Ok(reference)
    }
}

fn lattice(counts: &mut [usize], idx: usize, remaining: usize, visit: &mut dyn FnMut(&[usize])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        lattice(counts, idx + 1, remaining - c, visit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    /// Inverse temperature.
    pub beta: f64,
    /// External field.
    pub h: f64,
    /// Pair coupling.
    pub j: f64,
}

impl IsingParams {
    pub fn new(beta: f64, h: f64, j: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0 && h.is_finite() && j.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Ising parameters need finite β ≥ 0 (got β={beta}, h={h}, J={j})"
            )));
        }
        Ok(IsingParams { beta, h, j })
    }
}

/// Mean-field Glauber dynamics for spins `−` (color 0) and `+` (color 1).
///
/// With magnetization `m = y⁺ − y⁻`, a `−` spin flips up at rate
/// `exp(β(h + J·m))` and a `+` spin flips down at rate `exp(−β(h + J·m))`.
pub fn glauber_field(p: IsingParams) -> Result<RateField> {
    let IsingParams { beta, h, j } = IsingParams::new(p.beta, p.h, p.j)?;
    let bound = (beta * (h.abs() + j.abs())).exp();
    let f = move |from: usize, to: usize, y: &[f64]| {
        let m = y[1] - y[0];
        let energy = beta * (h + j * m);
        match (from, to) {
            (0, 1) => energy.exp(),
            (1, 0) => (-energy).exp(),
            _ => 0.0,
        }
    };
    RateField::new(
        2,
        f,
        vec![0.0, bound, bound, 0.0],
        beta * j.abs() * 2.0 * bound,
        "glauber",
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReedFrostParams {
    /// Contact rate.
    pub beta: f64,
    /// Recovery rate.
    pub recovery: f64,
}

impl ReedFrostParams {
    pub fn new(beta: f64, recovery: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0 && recovery.is_finite() && recovery >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Reed-Frost rates must be finite and nonnegative (β={beta}, ϱ={recovery})"
            )));
        }
        Ok(ReedFrostParams { beta, recovery })
    }
}

/// SIR dynamics on colors `S = 0`, `I = 1`, `R = 2` with density-scaled
/// infection: `f(S→I) = β·yᴵ`, `f(I→R) = ϱ`.
pub fn reed_frost_field(p: ReedFrostParams) -> Result<RateField> {
    let ReedFrostParams { beta, recovery } = ReedFrostParams::new(p.beta, p.recovery)?;
    let f = move |from: usize, to: usize, y: &[f64]| match (from, to) {
        (0, 1) => beta * y[1].max(0.0),
        (1, 2) => recovery,
        _ => 0.0,
    };
    let mut sup = vec![0.0; 9];
    sup[1] = beta;
    sup[5] = recovery;
    RateField::new(3, f, sup, beta, "reed-frost")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn glauber_examples() {
        let f = glauber_field(IsingParams::new(0.0, 0.7, -2.0).unwrap()).unwrap();
        for y in [[0.1, 0.9], [0.5, 0.5], [1.0, 0.0]] {
            assert_eq!(f.rate(0, 1, &y).unwrap(), 1.0);
            assert_eq!(f.rate(1, 0, &y).unwrap(), 1.0);
        }
        let f = glauber_field(IsingParams::new(2.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(f.rate(0, 1, &[0.3, 0.7]).unwrap(), 1.0);
        let f = glauber_field(IsingParams::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        let y = [0.25, 0.75];
        assert!(close(f.rate(0, 1, &y).unwrap(), 0.5f64.exp()));
        assert!(close(f.rate(1, 0, &y).unwrap(), (-0.5f64).exp()));
        assert!(close(f.sup(0, 1), 1f64.exp()));
        assert!(IsingParams::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reed_frost_examples() {
        let f = reed_frost_field(ReedFrostParams::new(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(f.rate(0, 1, &[0.9, 0.0, 0.1]).unwrap(), 0.0);
        assert!(close(f.rate(0, 1, &[0.5, 0.25, 0.25]).unwrap(), 0.5));
        for y in [[1.0, 0.0, 0.0], [0.2, 0.3, 0.5]] {
            assert_eq!(f.rate(1, 2, &y).unwrap(), 1.0);
            assert_eq!(f.rate(2, 0, &y).unwrap(), 0.0);
            assert_eq!(f.rate(0, 2, &y).unwrap(), 0.0);
        }
        assert!(ReedFrostParams::new(1.0, -0.5).is_err());
    }

    #[test]
    fn bound_violation_names_pair_and_point() {
        let f = RateField::new(
            2,
            |_, _, y: &[f64]| 3.0 * y[0],
            vec![0.0, 1.0, 1.0, 0.0],
            3.0,
            "bad",
        )
        .unwrap();
        assert!(f.rate(0, 1, &[0.2, 0.8]).is_ok());
        match f.rate(1, 0, &[0.5, 0.5]) {
            Err(Error::RateBound { i, j, y, .. }) => {
                assert_eq!((i, j), (1, 0));
                assert_eq!(y, vec![0.5, 0.5]);
            }
            other => panic!("expected bound error, got {other:?}"),
        }
    }

    #[test]
    fn grid_sup_covers_the_simplex() {
        let f = RateField::with_grid_sup(3, |i, _, y: &[f64]| 2.0 * y[i], 2.0, 20, "lin").unwrap();
        assert!(close(f.sup(0, 1), 2.2));
        assert!(f.rate(2, 0, &[0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn drift_conserves_mass() {
        let f = reed_frost_field(ReedFrostParams::new(2.0, 1.0).unwrap()).unwrap();
        let d = f.drift(&[0.6, 0.3, 0.1]).unwrap();
        assert!(d.iter().sum::<f64>().abs() < 1e-15);
        assert!(close(d[0], -0.36));
        assert!(close(d[2], 0.3));
    }

    #[test]
    fn constancy_probe() {
        let c = RateField::constant(2, &[0.0, 1.0, 2.0, 0.0]).unwrap();
        let r = c.constant_generator().unwrap();
        assert_eq!(r.get(1, 1), -2.0);
        let g = glauber_field(IsingParams::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(g.constant_generator(), Err(Error::NotConstant(_))));
    }
}
