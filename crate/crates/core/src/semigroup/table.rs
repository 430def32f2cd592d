use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::SimplexPath;
use crate::projection::EmpiricalSemigroup;
use crate::simplex::{identity, matmul, StochasticMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    ConstructedFromPath,
    EstimatedFromEnsemble,
}

/// Per-step transition matrices on a time grid.
///
/// `Q_{tᵢ,tⱼ}` is the ordered product of factors `i..j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupTable {
    k: usize,
    grid: Vec<f64>,
    factors: Vec<StochasticMatrix>,
    transfer: Vec<f64>,
    origin: Origin,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    k: usize,
    grid: Vec<f64>,
    factors: Vec<Vec<f64>>,
    transfer: Vec<f64>,
    origin: Origin,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "grid needs at least two times".into(),
        ));
    }
    if grid.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument(
            "grid times must be finite and ≥ 0".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl SemigroupTable {
    pub fn new(
        grid: Vec<f64>,
        factors: Vec<StochasticMatrix>,
        transfer: Vec<f64>,
        origin: Origin,
    ) -> Result<Self> {
        check_grid(&grid)?;
        let steps = grid.len() - 1;
        if factors.len() != steps || transfer.len() != steps {
            return Err(Error::InvalidArgument(format!(
                "{} grid steps but {} factors and {} transfers",
                steps,
                factors.len(),
                transfer.len()
            )));
        }
        let k = factors[0].k();
        if let Some(f) = factors.iter().find(|f| f.k() != k) {
            return Err(Error::Dimension {
                expected: k,
                got: f.k(),
            });
        }
        if transfer.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidArgument(
                "transfers must be finite and ≥ 0".into(),
            ));
        }
        Ok(SemigroupTable {
            k,
            grid,
            factors,
            transfer,
            origin,
        })
    }

    /// Table from bare factors, with each step's transfer measured as the
    /// mass the factor moves out of the path's marginal at the step start.
    pub fn from_factors_on_path(
        grid: Vec<f64>,
        factors: Vec<StochasticMatrix>,
        path: &SimplexPath,
        origin: Origin,
    ) -> Result<Self> {
        let transfer = grid
            .iter()
            .zip(&factors)
            .map(|(&t, q)| q.mass_transfer(&path.eval(t)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, factors, transfer, origin)
    }

    pub fn from_empirical(est: &EmpiricalSemigroup) -> Result<Self> {
        let transfer = est
            .counts
            .iter()
            .map(|c| c.changed() as f64 / c.earlier_occupancy().iter().sum::<u64>() as f64)
            .collect();
        Self::new(
            est.grid.clone(),
            est.factors.clone(),
            transfer,
            Origin::EstimatedFromEnsemble,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn factors(&self) -> &[StochasticMatrix] {
        &self.factors
    }

    pub fn transfer(&self) -> &[f64] {
        &self.transfer
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// `Q_{t_from, t_to}` for grid indices `from ≤ to`, as a raw row-major product.
    pub(crate) fn product_raw(&self, from: usize, to: usize) -> Vec<f64> {
        let mut acc = identity(self.k);
        for f in &self.factors[from..to] {
            acc = matmul(&acc, f.entries(), self.k);
        }
        acc
    }

    /// `Q_{t_from, t_to}` for grid indices `from ≤ to`.
    pub fn q(&self, from: usize, to: usize) -> Result<StochasticMatrix> {
        if from > to || to >= self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "grid indices ({from}, {to}) out of order or range"
            )));
        }
        StochasticMatrix::new(self.product_raw(from, to))
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let doc = TableJson {
            k: self.k,
            grid: self.grid.clone(),
            factors: self.factors.iter().map(|f| f.entries().to_vec()).collect(),
            transfer: self.transfer.clone(),
            origin: self.origin,
        };
        serde_json::to_writer_pretty(w, &doc)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let doc: TableJson = serde_json::from_reader(r)?;
        let factors = doc
            .factors
            .into_iter()
            .map(|f| {
                if f.len() != doc.k * doc.k {
                    return Err(Error::Dimension {
                        expected: doc.k * doc.k,
                        got: f.len(),
                    });
                }
                StochasticMatrix::new(f)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(doc.grid, factors, doc.transfer, doc.origin)
    }
}
