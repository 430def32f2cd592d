//! Cadlag, finitely parameterized paths on the simplex.
//!
//! A path is a sequence of segments tiling `[0, horizon]`. Each segment is
//! constant, a straight line between two points, or a right-continuous step
//! table. Jumps may occur at segment starts and at sample times inside step
//! tables; everything else is continuous.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::simplex::{tv_distance, SimplexPoint};

#[derive(Debug, Clone, PartialEq)]
pub enum Segment {
    Constant {
        start: f64,
        end: f64,
        point: SimplexPoint,
    },
    /// Straight line from `from` (at `start`) toward `to` (left limit at `end`).
    Linear {
        start: f64,
        end: f64,
        from: SimplexPoint,
        to: SimplexPoint,
    },
    /// Piecewise-constant, right-continuous table. The first sample sits at `start`.
    Sampled {
        start: f64,
        end: f64,
        samples: Vec<(f64, SimplexPoint)>,
    },
}

impl Segment {
    pub fn start(&self) -> f64 {
        match self {
            Segment::Constant { start, .. }
            | Segment::Linear { start, .. }
            | Segment::Sampled { start, .. } => *start,
        }
    }

    pub fn end(&self) -> f64 {
        match self {
            Segment::Constant { end, .. }
            | Segment::Linear { end, .. }
            | Segment::Sampled { end, .. } => *end,
        }
    }

    fn k(&self) -> usize {
        match self {
            Segment::Constant { point, .. } => point.k(),
            Segment::Linear { from, .. } => from.k(),
            Segment::Sampled { samples, .. } => samples[0].1.k(),
        }
    }

    /// Value at `t ∈ [start, end]`.
    fn value(&self, t: f64) -> SimplexPoint {
        match self {
            Segment::Constant { point, .. } => point.clone(),
            Segment::Linear {
                start,
                end,
                from,
                to,
            } => lerp_at(from, to, *start, *end, t),
            Segment::Sampled { samples, .. } => {
                let idx = samples.partition_point(|(s, _)| *s <= t);
                samples[idx.saturating_sub(1)].1.clone()
            }
        }
    }

    /// Left limit at `t ∈ (start, end]`.
    fn left_value(&self, t: f64) -> SimplexPoint {
        match self {
            Segment::Sampled { samples, .. } => {
                let idx = samples.partition_point(|(s, _)| *s < t);
                samples[idx.saturating_sub(1)].1.clone()
            }
            _ => self.value(t),
        }
    }
}

fn lerp_at(from: &SimplexPoint, to: &SimplexPoint, start: f64, end: f64, t: f64) -> SimplexPoint {
    let s = ((t - start) / (end - start)).clamp(0.0, 1.0);
    if s == 0.0 {
        return from.clone();
    }
    if s == 1.0 {
        return to.clone();
    }
    from.lerp(to, s)
        .expect("convex combination of simplex points")
}

/// One elementary move of a path inside an interval: a jump at a single
/// instant, or a straight-line drift over a time span.
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Jump {
        at: f64,
        from: SimplexPoint,
        to: SimplexPoint,
    },
    Drift {
        start: f64,
        end: f64,
        from: SimplexPoint,
        to: SimplexPoint,
    },
}

impl Piece {
    pub fn endpoints(&self) -> (&SimplexPoint, &SimplexPoint) {
        match self {
            Piece::Jump { from, to, .. } | Piece::Drift { from, to, .. } => (from, to),
        }
    }

    /// Time at which the piece completes.
    pub fn end_time(&self) -> f64 {
        match self {
            Piece::Jump { at, .. } => *at,
            Piece::Drift { end, .. } => *end,
        }
    }
}

/// How to interpret a table of `(t, y)` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    Step,
    Linear,
}

impl std::str::FromStr for Interp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "step" => Ok(Interp::Step),
            "linear" => Ok(Interp::Linear),
            other => Err(Error::Parse(format!("unknown interpolation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPath {
    k: usize,
    segments: Vec<Segment>,
}

impl SimplexPath {
    pub fn from_segments(segments: Vec<Segment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidPath("no segments".into()))?;
        if first.start() != 0.0 {
            return Err(Error::InvalidPath(format!(
                "path starts at {} instead of 0",
                first.start()
            )));
        }
        if segments
            .iter()
            .any(|s| matches!(s, Segment::Sampled { samples, .. } if samples.is_empty()))
        {
            return Err(Error::InvalidPath("step segment without samples".into()));
        }
        let k = first.k();
        let last_idx = segments.len() - 1;
        for (idx, seg) in segments.iter().enumerate() {
            let (start, end) = (seg.start(), seg.end());
            if !(start.is_finite() && end.is_finite()) || start >= end {
                return Err(Error::InvalidPath(format!(
                    "segment {idx} has bad span [{start}, {end}]"
                )));
            }
            if idx > 0 && segments[idx - 1].end() != start {
                return Err(Error::InvalidPath(format!(
                    "gap or overlap before segment {idx}"
                )));
            }
            if seg.k() != k {
                return Err(Error::Dimension {
                    expected: k,
                    got: seg.k(),
                });
            }
            match seg {
                Segment::Linear { from, to, .. } if to.k() != from.k() => {
                    return Err(Error::Dimension {
                        expected: from.k(),
                        got: to.k(),
                    });
                }
                Segment::Sampled { samples, .. } => {
                    if samples[0].0 != start {
                        return Err(Error::InvalidPath(format!(
                            "segment {idx}: first sample not at segment start"
                        )));
                    }
                    for w in samples.windows(2) {
                        if w[1].0 <= w[0].0 {
                            return Err(Error::InvalidPath(format!(
                                "segment {idx}: sample times not increasing"
                            )));
                        }
                    }
                    let last_t = samples[samples.len() - 1].0;
                    if last_t > end || (last_t == end && idx != last_idx) {
                        return Err(Error::InvalidPath(format!(
                            "segment {idx}: sample past segment end"
                        )));
                    }
                    if samples.iter().any(|(_, p)| p.k() != k) {
                        return Err(Error::Dimension {
                            expected: k,
                            got: 0,
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(SimplexPath { k, segments })
    }

    pub fn constant(point: SimplexPoint, horizon: f64) -> Result<Self> {
        Self::from_segments(vec![Segment::Constant {
            start: 0.0,
            end: horizon,
            point,
        }])
    }

    pub fn linear(from: SimplexPoint, to: SimplexPoint, horizon: f64) -> Result<Self> {
        Self::from_segments(vec![Segment::Linear {
            start: 0.0,
            end: horizon,
            from,
            to,
        }])
    }

    /// Right-continuous step path through `samples` on `[samples[0].t, horizon]`.
    pub fn step(samples: Vec<(f64, SimplexPoint)>, horizon: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidPath("no samples".into()));
        }
        Self::from_segments(vec![Segment::Sampled {
            start: samples[0].0,
            end: horizon,
            samples,
        }])
    }

    /// Continuous piecewise-linear interpolant of `knots`.
    pub fn piecewise_linear(knots: &[(f64, SimplexPoint)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidPath("need at least two knots".into()));
        }
        let segments = knots
            .windows(2)
            .map(|w| Segment::Linear {
                start: w[0].0,
                end: w[1].0,
                from: w[0].1.clone(),
                to: w[1].1.clone(),
            })
            .collect();
        Self::from_segments(segments)
    }

    pub fn from_rows(rows: Vec<(f64, SimplexPoint)>, interp: Interp) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidPath("need at least two rows".into()));
        }
        match interp {
            Interp::Linear => Self::piecewise_linear(&rows),
            Interp::Step => {
                let horizon = rows[rows.len() - 1].0;
                Self::step(rows, horizon)
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn horizon(&self) -> f64 {
        self.segments[self.segments.len() - 1].end()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        Ok(())
    }

    /// Right-continuous evaluation `Y_t`.
    pub fn eval(&self, t: f64) -> Result<SimplexPoint> {
        self.check_time(t)?;
        let idx = self.segments.partition_point(|s| s.start() <= t);
        Ok(self.segments[idx - 1].value(t))
    }

    /// Left limit `Y_{t-}`; equals `Y_0` at `t = 0`.
    pub fn eval_left(&self, t: f64) -> Result<SimplexPoint> {
        self.check_time(t)?;
        if t == 0.0 {
            return self.eval(0.0);
        }
        let idx = self.segments.partition_point(|s| s.start() < t);
        Ok(self.segments[idx - 1].left_value(t))
    }

    /// Times at which the path may be discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for seg in &self.segments {
            if seg.start() > 0.0 {
                out.push(seg.start());
            }
            if let Segment::Sampled { samples, .. } = seg {
                out.extend(samples.iter().skip(1).map(|(t, _)| *t));
            }
        }
        out
    }

    /// Ordered decomposition of the path over `(a, b]` into jumps and
    /// straight drifts. Zero-size moves are omitted.
    pub fn pieces(&self, a: f64, b: f64) -> Result<Vec<Piece>> {
        self.check_time(a)?;
        self.check_time(b)?;
        if a > b {
            return Err(Error::InvalidArgument(format!(
                "interval [{a}, {b}] reversed"
            )));
        }
        let mut out = Vec::new();
        if a == b {
            return Ok(out);
        }
        let jump = |out: &mut Vec<Piece>, at: f64, from: SimplexPoint, to: SimplexPoint| {
            if from != to {
                out.push(Piece::Jump { at, from, to });
            }
        };
        for (idx, seg) in self.segments.iter().enumerate() {
            let (s, e) = (seg.start(), seg.end());
            if s > b || e <= a {
                continue;
            }
            if a < s && idx > 0 {
                let before = self.segments[idx - 1].left_value(s);
                jump(&mut out, s, before, seg.value(s));
            }
            let (lo, hi) = (a.max(s), b.min(e));
            if lo >= hi {
                continue;
            }
            match seg {
                Segment::Constant { .. } => {}
                Segment::Linear { .. } => {
                    let (from, to) = (seg.value(lo), seg.left_value(hi));
                    if from != to {
                        out.push(Piece::Drift {
                            start: lo,
                            end: hi,
                            from,
                            to,
                        });
                    }
                }
                Segment::Sampled { samples, .. } => {
                    for w in samples.windows(2) {
                        if lo < w[1].0 && w[1].0 <= hi {
                            jump(&mut out, w[1].0, w[0].1.clone(), w[1].1.clone());
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Total variation over `[c, d]` in the half-L1 convention.
    ///
    /// Exact: linear segments contribute the distance between their clipped
    /// endpoints, jumps their size, constant stretches nothing.
    pub fn total_variation(&self, c: f64, d: f64) -> Result<f64> {
        if c > d {
            return Err(Error::InvalidArgument(format!(
                "total variation over reversed interval [{c}, {d}]"
            )));
        }
        let mut tv = 0.0;
        for piece in self.pieces(c, d)? {
            let (from, to) = piece.endpoints();
            tv += tv_distance(from, to)?;
        }
        Ok(tv)
    }

    /// `(t, Y_t)` at every segment start and sample time, plus the horizon.
    pub fn knots(&self) -> Vec<(f64, SimplexPoint)> {
        let mut out = Vec::new();
        for seg in &self.segments {
            match seg {
                Segment::Sampled { samples, .. } => out.extend(samples.iter().cloned()),
                _ => out.push((seg.start(), seg.value(seg.start()))),
            }
        }
        let h = self.horizon();
        if out.last().map(|(t, _)| *t) != Some(h) {
            let last = &self.segments[self.segments.len() - 1];
            out.push((h, last.value(h)));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_rows_csv(w, self.k, &self.knots())
    }

    pub fn read_csv<R: Read>(r: R, interp: Interp) -> Result<Self> {
        Self::from_rows(read_rows_csv(r)?, interp)
    }
}

/// Path total variation over `[c, d]`.
pub fn path_total_variation(p: &SimplexPath, c: f64, d: f64) -> Result<f64> {
    p.total_variation(c, d)
}

/// Writes `t,y1,...,yk` rows.
pub fn write_rows_csv<W: Write>(w: W, k: usize, rows: &[(f64, SimplexPoint)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=k).map(|i| format!("y{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for (t, y) in rows {
        let mut rec = vec![format!("{t}")];
        rec.extend(y.weights().iter().map(|x| format!("{x}")));
        wtr.write_record(&rec).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads `t,y1,...,yk` rows; times must be strictly increasing.
pub fn read_rows_csv<R: Read>(r: R) -> Result<Vec<(f64, SimplexPoint)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("t") || header.len() < 2 {
        return Err(Error::Parse("expected header t,y1,...,yk".into()));
    }
    let mut rows: Vec<(f64, SimplexPoint)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("'{s}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != header.len() {
            return Err(Error::Parse("row width differs from header".into()));
        }
        let t = vals[0];
        if let Some((prev, _)) = rows.last() {
            if t <= *prev {
                return Err(Error::Parse(format!("times not increasing at t = {t}")));
            }
        }
        rows.push((t, SimplexPoint::new(vals[1..].to_vec())?));
    }
    Ok(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(w: &[f64]) -> SimplexPoint {
        SimplexPoint::new(w.to_vec()).unwrap()
    }

    fn mixed() -> SimplexPath {
        SimplexPath::from_segments(vec![
            Segment::Constant {
                start: 0.0,
                end: 0.25,
                point: pt(&[0.5, 0.3, 0.2]),
            },
            Segment::Linear {
                start: 0.25,
                end: 0.5,
                from: pt(&[0.5, 0.3, 0.2]),
                to: pt(&[0.2, 0.4, 0.4]),
            },
            Segment::Sampled {
                start: 0.5,
                end: 0.75,
                samples: vec![(0.5, pt(&[0.3, 0.5, 0.2])), (0.6, pt(&[0.25, 0.35, 0.4]))],
            },
            Segment::Linear {
                start: 0.75,
                end: 1.0,
                from: pt(&[0.4, 0.3, 0.3]),
                to: pt(&[0.6, 0.2, 0.2]),
            },
        ])
        .unwrap()
    }

    #[test]
    fn rejects_gaps_and_bad_starts() {
        let p = pt(&[1.0, 0.0]);
        let gap = SimplexPath::from_segments(vec![
            Segment::Constant {
                start: 0.0,
                end: 0.4,
                point: p.clone(),
            },
            Segment::Constant {
                start: 0.5,
                end: 1.0,
                point: p.clone(),
            },
        ]);
        assert!(gap.is_err());
        let late = SimplexPath::from_segments(vec![Segment::Constant {
            start: 0.1,
            end: 1.0,
            point: p,
        }]);
        assert!(late.is_err());
    }

    #[test]
    fn evaluation_is_right_continuous_with_left_limits() {
        let path = mixed();
        assert_eq!(path.eval(0.5).unwrap(), pt(&[0.3, 0.5, 0.2]));
        assert_eq!(path.eval_left(0.5).unwrap(), pt(&[0.2, 0.4, 0.4]));
        assert_eq!(path.eval(0.6).unwrap(), pt(&[0.25, 0.35, 0.4]));
        assert_eq!(path.eval_left(0.6).unwrap(), pt(&[0.3, 0.5, 0.2]));
        assert_eq!(path.eval_left(0.75).unwrap(), pt(&[0.25, 0.35, 0.4]));
        assert_eq!(path.eval(1.0).unwrap(), pt(&[0.6, 0.2, 0.2]));
        let mid = path.eval(0.375).unwrap();
        assert!((mid.get(0) - 0.35).abs() < 1e-15);
        assert!(path.eval(1.5).is_err());
        assert!(path.eval(-0.1).is_err());
    }

    #[test]
    fn total_variation_examples() {
        let c = SimplexPath::constant(pt(&[0.3, 0.7]), 2.0).unwrap();
        assert_eq!(c.total_variation(0.0, 2.0).unwrap(), 0.0);

        let jump =
            SimplexPath::step(vec![(0.0, pt(&[1.0, 0.0])), (0.5, pt(&[0.0, 1.0]))], 1.0).unwrap();
        assert_eq!(jump.total_variation(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(jump.total_variation(0.0, 0.4).unwrap(), 0.0);
        assert_eq!(jump.total_variation(0.5, 1.0).unwrap(), 0.0);

        let lin = SimplexPath::linear(pt(&[0.8, 0.2]), pt(&[0.2, 0.8]), 1.0).unwrap();
        assert!((lin.total_variation(0.0, 1.0).unwrap() - 0.6).abs() < 1e-15);
        assert!((lin.total_variation(0.25, 0.75).unwrap() - 0.3).abs() < 1e-15);
        assert!(lin.total_variation(0.7, 0.2).is_err());

        // 0.15 + 0.3 (drift) + 0.2 (jump at .5) + 0.2 (jump at .6) + 0.15 (jump at .75) + 0.2
        let tv = mixed().total_variation(0.0, 1.0).unwrap();
        assert!((tv - 1.05).abs() < 1e-12, "{tv}");
    }

    #[test]
    fn pieces_are_ordered_and_cover_jumps() {
        let pieces = mixed().pieces(0.3, 0.75).unwrap();
        let kinds: Vec<_> = pieces
            .iter()
            .map(|p| match p {
                Piece::Jump { at, .. } => ("jump", *at),
                Piece::Drift { end, .. } => ("drift", *end),
            })
            .collect();
        assert_eq!(
            kinds,
            vec![("drift", 0.5), ("jump", 0.5), ("jump", 0.6), ("jump", 0.75)]
        );
    }

    #[test]
    fn csv_round_trip() {
        let lin = SimplexPath::piecewise_linear(&[
            (0.0, pt(&[0.8, 0.2])),
            (0.5, pt(&[0.4, 0.6])),
            (1.0, pt(&[0.5, 0.5])),
        ])
        .unwrap();
        let mut buf = Vec::new();
        lin.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone())
            .unwrap()
            .starts_with("t,y1,y2\n0,0.8,0.2\n"));
        assert_eq!(
            SimplexPath::read_csv(&buf[..], Interp::Linear).unwrap(),
            lin
        );

        let step = SimplexPath::read_csv(&buf[..], Interp::Step).unwrap();
        assert_eq!(step.eval(0.7).unwrap(), pt(&[0.4, 0.6]));
        assert_eq!(step.eval(1.0).unwrap(), pt(&[0.5, 0.5]));
        assert!(
            SimplexPath::read_csv(&b"t,y1,y2\n0,0.5,0.5\n0,0.5,0.5\n"[..], Interp::Step).is_err()
        );
    }

    proptest! {
        #[test]
        fn total_variation_is_additive(c in 0.0f64..1.0, s in 0.0f64..1.0, d in 0.0f64..1.0) {
            let mut v = [c, s, d];
            v.sort_by(f64::total_cmp);
            let p = mixed();
            let whole = p.total_variation(v[0], v[2]).unwrap();
            let split = p.total_variation(v[0], v[1]).unwrap() + p.total_variation(v[1], v[2]).unwrap();
            prop_assert!((whole - split).abs() <= 1e-9);
        }
    }
}
