//! Finite ensembles of color-swatch paths.
//!
//! `n` sites share a time horizon; each site's path is its initial color
//! followed by a finite list of flips. Flips are stored globally sorted by
//! `(time, site)`, so several sites may flip at the same instant.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipEvent {
    pub t: f64,
    pub site: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    k: usize,
    n: usize,
    horizon: f64,
    seed: u64,
    initial: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePath {
    k: usize,
    horizon: f64,
    seed: u64,
    initial: Vec<usize>,
    events: Vec<FlipEvent>,
}

impl EnsemblePath {
    /// Validates ordering, color ranges and that each flip leaves the color
    /// the site actually holds.
    pub fn new(
        k: usize,
        horizon: f64,
        seed: u64,
        initial: Vec<usize>,
        events: Vec<FlipEvent>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidEnsemble("k = 0".into()));
        }
        if initial.is_empty() {
            return Err(Error::InvalidEnsemble("no sites".into()));
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidEnsemble(format!("bad horizon {horizon}")));
        }
        if let Some(c) = initial.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidEnsemble(format!("initial color {c} >= k")));
        }
        let mut colors = initial.clone();
        let mut prev: Option<(f64, usize)> = None;
        for ev in &events {
            if !(ev.t > 0.0 && ev.t <= horizon) {
                return Err(Error::InvalidEnsemble(format!(
                    "event time {} outside (0, {horizon}]",
                    ev.t
                )));
            }
            if ev.site >= colors.len() || ev.to >= k || ev.from == ev.to {
                return Err(Error::InvalidEnsemble(format!("malformed event {ev:?}")));
            }
            if let Some(p) = prev {
                if (ev.t, ev.site) <= p {
                    return Err(Error::InvalidEnsemble(format!(
                        "events not strictly ordered at t = {}",
                        ev.t
                    )));
                }
            }
            if colors[ev.site] != ev.from {
                return Err(Error::InvalidEnsemble(format!(
                    "site {} has color {} before t = {}, event says {}",
                    ev.site, colors[ev.site], ev.t, ev.from
                )));
            }
            colors[ev.site] = ev.to;
            prev = Some((ev.t, ev.site));
        }
        Ok(EnsemblePath {
            k,
            horizon,
            seed,
            initial,
            events,
        })
    }

    /// Sorts the events first; for simulators that collect per-site flips.
    pub fn from_unsorted(
        k: usize,
        horizon: f64,
        seed: u64,
        initial: Vec<usize>,
        mut events: Vec<FlipEvent>,
    ) -> Result<Self> {
        events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.site.cmp(&b.site)));
        Self::new(k, horizon, seed, initial, events)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.initial.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn events(&self) -> &[FlipEvent] {
        &self.events
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(())
    }

    /// Site colors at `t` (right-continuous: flips at exactly `t` applied).
    pub fn colors_at(&self, t: f64) -> Result<Vec<usize>> {
        self.check_time(t)?;
        let upto = self.events.partition_point(|e| e.t <= t);
        Ok(self.replay(upto))
    }

    /// Site colors just before `t`.
    pub fn colors_before(&self, t: f64) -> Result<Vec<usize>> {
        self.check_time(t)?;
        let upto = self.events.partition_point(|e| e.t < t);
        Ok(self.replay(upto))
    }

    fn replay(&self, upto: usize) -> Vec<usize> {
        let mut colors = self.initial.clone();
        for ev in &self.events[..upto] {
            colors[ev.site] = ev.to;
        }
        colors
    }

    /// Occupancy counts at the end of the horizon, from replaying every event.
    pub fn final_counts(&self) -> Vec<u64> {
        counts_of(&self.replay(self.events.len()), self.k)
    }

    /// Distinct event times, ascending.
    pub fn event_times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for ev in &self.events {
            if out.last() != Some(&ev.t) {
                out.push(ev.t);
            }
        }
        out
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            k: self.k,
            n: self.n(),
            horizon: self.horizon,
            seed: self.seed,
            initial: self.initial.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for ev in &self.events {
            serde_json::to_writer(&mut w, ev)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Parse("empty ensemble file".into()))??;
        let header: Header = serde_json::from_str(&first)?;
        if header.n != header.initial.len() {
            return Err(Error::Parse(format!(
                "header says n = {} but lists {} initial colors",
                header.n,
                header.initial.len()
            )));
        }
        let mut events = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str::<FlipEvent>(&line)?);
        }
        Self::new(
            header.k,
            header.horizon,
            header.seed,
            header.initial,
            events,
        )
    }
}

pub(crate) fn counts_of(colors: &[usize], k: usize) -> Vec<u64> {
    let mut c = vec![0u64; k];
    for &x in colors {
        c[x] += 1;
    }
    c
}
