use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::ensemble::{EnsemblePath, FlipEvent};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::simplex::SimplexPoint;

use super::{FluidTrack, RateField};

const INIT_TAG: u64 = 1;
const DYNAMICS_TAG: u64 = 2;

/// Initial configuration: explicit site colors, or i.i.d. draws from a point.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Colors(Vec<usize>),
    Iid(SimplexPoint),
}

impl InitialState {
    fn realize(&self, k: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
        match self {
            InitialState::Colors(c) => {
                if c.len() != n {
                    return Err(Error::Dimension {
                        expected: n,
                        got: c.len(),
                    });
                }
                if let Some(bad) = c.iter().find(|&&x| x >= k) {
                    return Err(Error::InvalidArgument(format!(
                        "initial color {bad} >= k = {k}"
                    )));
                }
                Ok(c.clone())
            }
            InitialState::Iid(y) => {
                if y.k() != k {
                    return Err(Error::Dimension {
                        expected: k,
                        got: y.k(),
                    });
                }
                let mut r = rng::stream(rng::derive_seed(seed, INIT_TAG), 0);
                Ok((0..n)
                    .map(|_| rng::sample_index(y.weights(), r.random()))
                    .collect())
            }
        }
    }
}

fn check_run(n: usize, horizon: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("bad horizon {horizon}")));
    }
    Ok(())
}

/// Sites grouped by color, with O(1) membership moves.
struct Occupancy {
    members: Vec<Vec<usize>>,
    slot: Vec<usize>,
}

impl Occupancy {
    fn new(colors: &[usize], k: usize) -> Self {
        let mut members = vec![Vec::new(); k];
        let mut slot = vec![0; colors.len()];
        for (site, &c) in colors.iter().enumerate() {
            slot[site] = members[c].len();
            members[c].push(site);
        }
        Occupancy { members, slot }
    }

    fn count(&self, c: usize) -> usize {
        self.members[c].len()
    }

    fn relocate(&mut self, site: usize, from: usize, to: usize) {
        let pos = self.slot[site];
        let list = &mut self.members[from];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos];
            self.slot[moved] = pos;
        }
        self.slot[site] = self.members[to].len();
        self.members[to].push(site);
    }
}

/// Exact finite-`n` mean-field chain by Poisson thinning.
///
/// Every site carries, for each ordered pair `(i, j)`, a candidate clock of
/// rate `λ_{i,j}`. A candidate fires only if the site holds color `i` and a
/// uniform draw falls below `f_{i,j}(Y_{τ−}) / λ_{i,j}`, where `Y_{τ−}` is
/// the empirical frequency just before the candidate. Candidates at sites of
/// the wrong color are rejected outright, so the clocks are superposed per
/// color: pair `(i, j)` proposes at total rate `λ_{i,j}·N_i`.
pub fn simulate_finite(
    field: &RateField,
    n: usize,
    init: &InitialState,
    horizon: f64,
    seed: u64,
) -> Result<EnsemblePath> {
    check_run(n, horizon)?;
    let k = field.k();
    let initial = init.realize(k, n, seed)?;
    let mut occ = Occupancy::new(&initial, k);
    let mut rng = rng::stream(rng::derive_seed(seed, DYNAMICS_TAG), 0);

    let out_rate: Vec<f64> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| field.sup(i, j)).sum())
        .collect();
    let mut y = vec![0.0; k];
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        let total: f64 = (0..k).map(|i| out_rate[i] * occ.count(i) as f64).sum();
        if total <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(&mut rng);
        t += wait / total;
        if t > horizon {
            break;
        }
        let from = pick(
            &mut rng,
            total,
            (0..k).map(|i| out_rate[i] * occ.count(i) as f64),
        );
        let to = pick(
            &mut rng,
            out_rate[from],
            (0..k).map(|j| if j == from { 0.0 } else { field.sup(from, j) }),
        );
        let list = &occ.members[from];
        let site = list[rng.random_range(0..list.len())];
        for (c, yc) in y.iter_mut().enumerate() {
            *yc = occ.count(c) as f64 / n as f64;
        }
        let rate = field.rate(from, to, &y)?;
        let u: f64 = rng.random();
        if u * field.sup(from, to) < rate {
            occ.relocate(site, from, to);
            events.push(FlipEvent { t, site, from, to });
        }
    }
    EnsemblePath::new(k, horizon, seed, initial, events)
}

/// Index `i` with probability `weights[i] / total`.
fn pick(rng: &mut StreamRng, total: f64, weights: impl Iterator<Item = f64>) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if target < acc {
            return i;
        }
    }
    last_positive
}

/// Independent replicates of [`simulate_finite`], one per seed, in seed order.
pub fn simulate_finite_replicates(
    field: &RateField,
    n: usize,
    init: &InitialState,
    horizon: f64,
    seeds: &[u64],
) -> Result<Vec<EnsemblePath>> {
    seeds
        .par_iter()
        .map(|&s| simulate_finite(field, n, init, horizon, s))
        .collect()
}

/// The infinite-exchangeable limit process restricted to `n` coordinates.
///
/// Coordinates are i.i.d.: each starts from `y0` and flips `i → j` at rate
/// `f_{i,j}(y_t)`, where `y_t` is the fluid path. Sampling thins candidate
/// clocks of rate `λ_{i,j}` against the interpolated fluid path. Coordinate
/// `c` draws only from stream `(seed, c)`, so output does not depend on the
/// worker count.
pub fn simulate_limit(
    field: &RateField,
    n: usize,
    y0: &SimplexPoint,
    horizon: f64,
    tol: f64,
    seed: u64,
) -> Result<EnsemblePath> {
    check_run(n, horizon)?;
    let k = field.k();
    if y0.k() != k {
        return Err(Error::Dimension {
            expected: k,
            got: y0.k(),
        });
    }
    if horizon == 0.0 {
        let init = InitialState::Iid(y0.clone()).realize(k, n, seed)?;
        return EnsemblePath::new(k, 0.0, seed, init, Vec::new());
    }
    let track = FluidTrack::solve(field, y0, horizon, tol, &[])?;
    let out_rate: Vec<f64> = (0..k)
        .map(|i| (0..k).filter(|&j| j != i).map(|j| field.sup(i, j)).sum())
        .collect();

    let per_site: Vec<(usize, Vec<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let mut rng = rng::stream(seed, site as u64);
            let mut color = rng::sample_index(y0.weights(), rng.random());
            let start = color;
            let mut y = vec![0.0; k];
            let mut flips = Vec::new();
            let mut t = 0.0;
            loop {
                let total = out_rate[color];
                if total <= 0.0 {
                    break;
                }
                let wait: f64 = Exp1.sample(&mut rng);
                t += wait / total;
                if t > horizon {
                    break;
                }
                let to = pick(
                    &mut rng,
                    total,
                    (0..k).map(|j| if j == color { 0.0 } else { field.sup(color, j) }),
                );
                track.at(t, &mut y);
                let rate = field.rate(color, to, &y)?;
                let u: f64 = rng.random();
                if u * field.sup(color, to) < rate {
                    flips.push(FlipEvent {
                        t,
                        site,
                        from: color,
                        to,
                    });
                    color = to;
                }
            }
            Ok((start, flips))
        })
        .collect::<Result<_>>()?;

    let initial = per_site.iter().map(|(c, _)| *c).collect();
    let events = per_site.into_iter().flat_map(|(_, f)| f).collect();
    EnsemblePath::from_unsorted(k, horizon, seed, initial, events)
}
