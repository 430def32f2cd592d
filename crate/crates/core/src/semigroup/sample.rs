use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{EnsemblePath, FlipEvent};
use crate::error::{Error, Result};
use crate::rng::{sample_index, stream};
use crate::simplex::SimplexPoint;

use super::table::SemigroupTable;

/// `n` i.i.d. time-inhomogeneous chains driven by the table's factors.
///
/// Each coordinate starts from a draw of `y0`, then at every grid step moves
/// by its current row of that step's factor. Flips are stamped at the step's
/// end time. Coordinate `c` consumes only stream `(seed, c)`.
pub fn sample_inhomogeneous_chain(
    tab: &SemigroupTable,
    y0: &SimplexPoint,
    n: usize,
    seed: u64,
) -> Result<EnsemblePath> {
    let k = tab.k();
    if y0.k() != k {
        return Err(Error::Dimension {
            expected: k,
            got: y0.k(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "need at least one coordinate".into(),
        ));
    }
    let grid = tab.grid();
    if grid[0] != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "table grid starts at {} rather than 0",
            grid[0]
        )));
    }
    let per_site: Vec<(usize, Vec<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let mut rng = stream(seed, site as u64);
            let start = sample_index(y0.weights(), rng.random());
            let mut color = start;
            let mut flips = Vec::new();
            for (f, &t) in tab.factors().iter().zip(&grid[1..]) {
                let next = sample_index(f.row(color), rng.random());
                if next != color {
                    flips.push(FlipEvent {
                        t,
                        site,
                        from: color,
                        to: next,
                    });
                    color = next;
                }
            }
            (start, flips)
        })
        .collect();
    let initial = per_site.iter().map(|(c, _)| *c).collect();
    let events = per_site.into_iter().flat_map(|(_, f)| f).collect();
    EnsemblePath::from_unsorted(k, grid[grid.len() - 1], seed, initial, events)
}
