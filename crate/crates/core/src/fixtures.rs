//! Small processes with known behaviour: a singular clock, a threshold
//! process whose projection is not Feller, and pairs of processes that share
//! a projection but not a covering semigroup.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::ensemble::{EnsemblePath, FlipEvent};
use crate::error::{Error, Result};
use crate::path::{Segment, SimplexPath};
use crate::rng::{derive_seed, sample_index, stream, SHARED_STREAM};
use crate::simplex::SimplexPoint;

const X_TAG: u64 = 11;
const Z_TAG: u64 = 12;
const B_TAG: u64 = 13;

/// Below this the Cantor function is under `1e-13`.
const CANTOR_FLOOR: f64 = 1.0 / (1u128 << 70) as f64;

/// A nondecreasing map of `[0, 1]` onto itself fixing both ends.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneClock {
    Identity,
    Cantor,
    /// Piecewise linear through `(x, f(x))` knots.
    Table(Vec<(f64, f64)>),
}

impl MonotoneClock {
    /// Knots must start at `(0, 0)`, end at `(1, 1)` and be nondecreasing in
    /// both coordinates with strictly increasing `x`.
    pub fn table(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 || knots[0] != (0.0, 0.0) || knots[knots.len() - 1] != (1.0, 1.0) {
            return Err(Error::InvalidArgument(
                "clock table must run from (0, 0) to (1, 1)".into(),
            ));
        }
        if knots
            .windows(2)
            .any(|w| !(w[1].0 > w[0].0 && w[1].1 >= w[0].1))
        {
            return Err(Error::InvalidArgument("clock table is not monotone".into()));
        }
        Ok(MonotoneClock::Table(knots))
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            MonotoneClock::Identity => x,
            MonotoneClock::Cantor => cantor(x),
            MonotoneClock::Table(knots) => {
                let idx = knots.partition_point(|(a, _)| *a <= x);
                if idx >= knots.len() {
                    return 1.0;
                }
                let ((x0, y0), (x1, y1)) = (knots[idx - 1], knots[idx]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// Smallest `t` with `f(t) ≥ u`, to within `1e-12`.
    pub fn inverse(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= u {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// `(1 − f, f)` as a piecewise-linear path with `pieces` equal pieces on `[0, 1]`.
    pub fn limit_path(&self, pieces: usize) -> Result<SimplexPath> {
        if pieces == 0 {
            return Err(Error::InvalidArgument("need at least one piece".into()));
        }
        let knots = (0..=pieces)
            .map(|i| {
                let t = i as f64 / pieces as f64;
                let c = self.eval(t);
                Ok((t, SimplexPoint::new(vec![1.0 - c, c])?))
            })
            .collect::<Result<Vec<_>>>()?;
        SimplexPath::piecewise_linear(&knots)
    }
}

/// Cantor function by the ternary recursion, run on the exact binary
/// expansion of `x` so that no rounding enters before the last level.
fn cantor(x: f64) -> f64 {
    if x < CANTOR_FLOOR {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // x = num / 2^123 exactly, since x ≥ 2^-70 has no bits below 2^-122
    const BITS: u32 = 123;
    let denom: u128 = 1 << BITS;
    let mut num = (x * denom as f64) as u128;
    let (mut acc, mut scale) = (0.0f64, 1.0f64);
    for _ in 0..46 {
        if num == 0 {
            return acc;
        }
        let tripled = 3 * num;
        if tripled <= denom {
            num = tripled;
        } else if tripled < 2 * denom {
            return acc + 0.5 * scale;
        } else {
            num = tripled - 2 * denom;
            acc += 0.5 * scale;
        }
        scale *= 0.5;
    }
    acc + scale * (num as f64 / denom as f64)
}

/// Every site starts at color 0 and moves to 1 once, at `f⁻¹(Uᵢ)`.
pub fn singular_clock_process(clock: &MonotoneClock, n: usize, seed: u64) -> Result<EnsemblePath> {
    check_n(n)?;
    let times: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|site| clock.inverse(stream(seed, site as u64).random()))
        .collect();
    let mut initial = vec![0; n];
    let mut events = Vec::with_capacity(n);
    for (site, &t) in times.iter().enumerate() {
        if t <= 0.0 {
            initial[site] = 1;
        } else {
            events.push(FlipEvent {
                t,
                site,
                from: 0,
                to: 1,
            });
        }
    }
    EnsemblePath::from_unsorted(2, 1.0, seed, initial, events)
}

/// Sites start i.i.d. with color 1 w.p. `y0` and each adopts
/// `b = 1{y0 ≥ 1/2}` at an independent `Exp(1)` time.
pub fn threshold_process(y0: f64, n: usize, horizon: f64, seed: u64) -> Result<EnsemblePath> {
    check_n(n)?;
    check_horizon(horizon)?;
    if !(0.0..=1.0).contains(&y0) {
        return Err(Error::InvalidArgument(format!("y0 = {y0} outside [0, 1]")));
    }
    let target = usize::from(y0 >= 0.5);
    let per_site: Vec<(usize, Option<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let mut rng = stream(seed, site as u64);
            let color = usize::from(rng.random::<f64>() < y0);
            let tau: f64 = Exp1.sample(&mut rng);
            let flip = (color != target && tau <= horizon && tau > 0.0).then_some(FlipEvent {
                t: tau,
                site,
                from: color,
                to: target,
            });
            (color, flip)
        })
        .collect();
    let initial = per_site.iter().map(|(c, _)| *c).collect();
    let events = per_site.into_iter().filter_map(|(_, f)| f).collect();
    EnsemblePath::from_unsorted(2, horizon, seed, initial, events)
}

/// `γ(y0, t)`: the limiting fraction of color 1 in [`threshold_process`].
pub fn threshold_limit(y0: f64, t: f64) -> f64 {
    let b = if y0 >= 0.5 { 1.0 } else { 0.0 };
    y0 * (-t).exp() + b * (1.0 - (-t).exp())
}

/// Arrival times of a rate-one Poisson clock on `(0, horizon]`.
pub fn poisson_times(seed: u64, horizon: f64) -> Vec<f64> {
    let mut rng = stream(seed, SHARED_STREAM);
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        let w: f64 = Exp1.sample(&mut rng);
        t += w;
        if t > horizon {
            return out;
        }
        out.push(t);
    }
}

/// Two processes whose color-1 fraction alternates `2/3 → 1/3 → 2/3 …` at
/// shared Poisson(1) times.
///
/// Both start from the same i.i.d. configuration with two thirds of the
/// sites at color 1. At a jump, `X` moves only sites of the color in excess,
/// each with a fair coin; `Z` recolors every site independently with the
/// post-jump fraction.
pub fn poisson_recolor_pair(
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<(EnsemblePath, EnsemblePath)> {
    check_n(n)?;
    check_horizon(horizon)?;
    let jumps = poisson_times(seed, horizon);
    let (x_seed, z_seed) = (derive_seed(seed, X_TAG), derive_seed(seed, Z_TAG));
    let per_site: Vec<(usize, Vec<FlipEvent>, Vec<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let start = usize::from(stream(seed, site as u64).random::<f64>() < 2.0 / 3.0);
            let (mut rx, mut rz) = (stream(x_seed, site as u64), stream(z_seed, site as u64));
            let (mut cx, mut cz) = (start, start);
            let (mut ex, mut ez) = (Vec::new(), Vec::new());
            for (m, &t) in jumps.iter().enumerate() {
                // before an even-numbered jump the level is 2/3, so color 1 is in excess
                let excess = if m % 2 == 0 { 1 } else { 0 };
                let post = if m % 2 == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
                let coin = rx.random::<f64>() < 0.5;
                if cx == excess && coin {
                    ex.push(FlipEvent {
                        t,
                        site,
                        from: cx,
                        to: 1 - cx,
                    });
                    cx = 1 - cx;
                }
                let next = usize::from(rz.random::<f64>() < post);
                if next != cz {
                    ez.push(FlipEvent {
                        t,
                        site,
                        from: cz,
                        to: next,
                    });
                    cz = next;
                }
            }
            (start, ex, ez)
        })
        .collect();
    let initial: Vec<usize> = per_site.iter().map(|(c, _, _)| *c).collect();
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for (_, ex, ez) in per_site {
        xs.extend(ex);
        zs.extend(ez);
    }
    let x = EnsemblePath::from_unsorted(2, horizon, seed, initial.clone(), xs)?;
    let z = EnsemblePath::from_unsorted(2, horizon, seed, initial, zs)?;
    Ok((x, z))
}

/// Two processes with the stationary projection `(p, 1 − p)`.
///
/// Both start from the same i.i.d. configuration with color 0 w.p. `p`.
/// `A` never moves. At Poisson(1) times `B` sends every color-0 site to 1
/// and each color-1 site to 0 with probability `p / (1 − p)`.
pub fn feller_degenerate_pair(
    p: f64,
    n: usize,
    horizon: f64,
    seed: u64,
) -> Result<(EnsemblePath, EnsemblePath)> {
    check_n(n)?;
    check_horizon(horizon)?;
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1/2)")));
    }
    let jumps = poisson_times(seed, horizon);
    let b_seed = derive_seed(seed, B_TAG);
    let back = p / (1.0 - p);
    let per_site: Vec<(usize, Vec<FlipEvent>)> = (0..n)
        .into_par_iter()
        .map(|site| {
            let start = sample_index(&[p, 1.0 - p], stream(seed, site as u64).random());
            let mut rng = stream(b_seed, site as u64);
            let mut color = start;
            let mut flips = Vec::new();
            for &t in &jumps {
                let u: f64 = rng.random();
                let next = if color == 0 || u < back {
                    1 - color
                } else {
                    color
                };
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
    let initial: Vec<usize> = per_site.iter().map(|(c, _)| *c).collect();
    let events = per_site.into_iter().flat_map(|(_, f)| f).collect();
    let a = EnsemblePath::new(2, horizon, seed, initial.clone(), Vec::new())?;
    let b = EnsemblePath::from_unsorted(2, horizon, seed, initial, events)?;
    Ok((a, b))
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one site".into()));
    }
    Ok(())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("bad horizon {horizon}")));
    }
    Ok(())
}

/// A named path with the grid it is tested on.
#[derive(Debug, Clone)]
pub struct CorpusPath {
    pub name: &'static str,
    pub path: SimplexPath,
    pub grid: Vec<f64>,
}

fn pt(w: &[f64]) -> Result<SimplexPoint> {
    SimplexPoint::new(w.to_vec())
}

fn uniform_grid(horizon: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| horizon * i as f64 / steps as f64)
        .collect()
}

/// Color-1 fraction alternating `2/3 ↔ 1/3`, starting at `2/3`, with jumps at `times`.
pub fn alternating_path(times: &[f64], horizon: f64) -> Result<SimplexPath> {
    let (high, low) = (pt(&[1.0 / 3.0, 2.0 / 3.0])?, pt(&[2.0 / 3.0, 1.0 / 3.0])?);
    let mut samples = vec![(0.0, high.clone())];
    for (m, &t) in times.iter().enumerate() {
        samples.push((
            t,
            if m % 2 == 0 {
                low.clone()
            } else {
                high.clone()
            },
        ));
    }
    SimplexPath::step(samples, horizon)
}

/// The standard path corpus: constant, linear, Cantor, single jump,
/// alternating and a three-color path mixing drifts and jumps.
pub fn path_corpus() -> Result<Vec<CorpusPath>> {
    let mixed = SimplexPath::from_segments(vec![
        Segment::Constant {
            start: 0.0,
            end: 0.25,
            point: pt(&[0.5, 0.3, 0.2])?,
        },
        Segment::Linear {
            start: 0.25,
            end: 0.5,
            from: pt(&[0.5, 0.3, 0.2])?,
            to: pt(&[0.2, 0.4, 0.4])?,
        },
        Segment::Sampled {
            start: 0.5,
            end: 0.75,
            samples: vec![(0.5, pt(&[0.3, 0.5, 0.2])?), (0.6, pt(&[0.25, 0.35, 0.4])?)],
        },
        Segment::Linear {
            start: 0.75,
            end: 1.0,
            from: pt(&[0.4, 0.3, 0.3])?,
            to: pt(&[0.6, 0.2, 0.2])?,
        },
    ])?;
    Ok(vec![
        CorpusPath {
            name: "constant",
            path: SimplexPath::constant(pt(&[0.3, 0.7])?, 1.0)?,
            grid: uniform_grid(1.0, 4),
        },
        CorpusPath {
            name: "linear",
            path: SimplexPath::linear(pt(&[0.8, 0.2])?, pt(&[0.2, 0.8])?, 1.0)?,
            grid: uniform_grid(1.0, 10),
        },
        CorpusPath {
            name: "cantor",
            path: MonotoneClock::Cantor.limit_path(3usize.pow(8))?,
            grid: uniform_grid(1.0, 9),
        },
        CorpusPath {
            name: "single-jump",
            path: SimplexPath::step(vec![(0.0, pt(&[1.0, 0.0])?), (0.5, pt(&[0.0, 1.0])?)], 1.0)?,
            grid: vec![0.0, 0.5, 1.0],
        },
        CorpusPath {
            name: "alternating",
            path: alternating_path(&[0.2, 0.45, 0.7, 0.9], 1.0)?,
            grid: uniform_grid(1.0, 10),
        },
        CorpusPath {
            name: "mixed-k3",
            path: mixed,
            grid: uniform_grid(1.0, 8),
        },
    ])
}
