//! Reductions of agent states: preference coordinates, Binder cumulants,
//! persistence times and 2-D histograms.

use std::io::{self, Write};

use thiserror::Error;

use crate::learning::softmax_into;
use crate::report::fmt_float;

/// An agent's position in attraction space and preference space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReducedCoords {
    /// Buying versus selling: `(A_B1 + A_B2 - A_S1 - A_S2) / 2`.
    pub delta_bs: f64,
    /// Market 1 versus market 2: `(A_B1 + A_S1 - A_B2 - A_S2) / 2`.
    pub delta_12: f64,
    /// Total probability of buying.
    pub p_buy: f64,
    /// Total probability of going to market 1.
    pub p_market1: f64,
}

/// Reduces a four-action attraction vector (ordered B1, S1, B2, S2).
pub fn reduce_coords(attractions: &[f64; 4], temperature: f64) -> ReducedCoords {
    let [b1, s1, b2, s2] = *attractions;
    let mut p = [0.0; 4];
    softmax_into(attractions, temperature, &mut p);
    ReducedCoords {
        delta_bs: 0.5 * (b1 + b2 - s1 - s2),
        delta_12: 0.5 * (b1 + s1 - b2 - s2),
        p_buy: p[0] + p[2],
        p_market1: p[0] + p[1],
    }
}

/// Reduces a two-group agent (attractions for market 1 and 2). The buy
/// preference is the group's fixed value and `delta_bs` is zero.
pub fn reduce_two_group(attractions: &[f64; 2], temperature: f64, p_buy: f64) -> ReducedCoords {
    let delta = attractions[0] - attractions[1];
    ReducedCoords {
        delta_bs: 0.0,
        delta_12: delta,
        p_buy,
        p_market1: logistic(delta / temperature),
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sign quadrant of `(delta_bs, delta_12)`, numbered 0..4 as
/// (+,+), (+,-), (-,+), (-,-). `None` if either coordinate is exactly zero.
pub fn quadrant(c: &ReducedCoords) -> Option<u8> {
    if c.delta_bs == 0.0 || c.delta_12 == 0.0 {
        return None;
    }
    Some(2 * u8::from(c.delta_bs < 0.0) + u8::from(c.delta_12 < 0.0))
}

/// Market half-plane of `delta_12` (two-group variant): 0 for market 1, 1 for market 2.
pub fn market_side(c: &ReducedCoords) -> Option<u8> {
    if c.delta_12 == 0.0 {
        None
    } else {
        Some(u8::from(c.delta_12 < 0.0))
    }
}

/// First downward crossing of `level` by `values` over increasing `xs`,
/// linearly interpolated between the bracketing grid points.
pub fn downward_crossing(xs: &[f64], values: &[f64], level: f64) -> Option<f64> {
    assert_eq!(xs.len(), values.len());
    xs.windows(2).zip(values.windows(2)).find_map(|(x, v)| {
        if v[0] >= level && v[1] < level {
            Some(x[0] + (x[1] - x[0]) * (v[0] - level) / (v[0] - v[1]))
        } else {
            None
        }
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BinderError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(u64),
    #[error("second moment is zero; the Binder cumulant is undefined")]
    DegenerateSample,
}

/// Running raw moments about zero, mergeable across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum2: f64,
    pub sum4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let x2 = x * x;
        self.n += 1;
        self.sum += x;
        self.sum2 += x2;
        self.sum4 += x2 * x2;
    }

    pub fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum2 += other.sum2;
        self.sum4 += other.sum4;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// `1 - <x^4> / (3 <x^2>^2)`.
    pub fn binder(&self) -> Result<f64, BinderError> {
        if self.n < 2 {
            return Err(BinderError::TooFewSamples(self.n));
        }
        let m2 = self.sum2 / self.n as f64;
        let m4 = self.sum4 / self.n as f64;
        if m2 <= 0.0 {
            return Err(BinderError::DegenerateSample);
        }
        Ok(1.0 - m4 / (3.0 * m2 * m2))
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Binder cumulant with raw moments about zero.
pub fn binder_cumulant(samples: &[f64]) -> Result<f64, BinderError> {
    samples.iter().copied().collect::<Moments>().binder()
}

/// One stay in a single sign region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub label: u8,
    /// Number of periods spent in the region.
    pub periods: u64,
}

/// Streaming detector of region changes for one agent.
///
/// Periods with no label (a zero coordinate) extend the current interval.
/// Counting starts at the first labelled period.
#[derive(Debug, Clone, Default)]
pub struct PersistenceTracker {
    current: Option<Interval>,
    /// The current interval began before observation started.
    left_censored: bool,
}

impl PersistenceTracker {
    /// Tracker joining a trajectory midway: the first interval it sees has
    /// an unknown start and is never reported.
    pub fn joining() -> Self {
        PersistenceTracker { current: None, left_censored: true }
    }

    /// Feeds one period; returns the interval that this period closed, if any.
    pub fn observe(&mut self, label: Option<u8>) -> Option<Interval> {
        match (&mut self.current, label) {
            (None, None) => None,
            (None, Some(l)) => {
                self.current = Some(Interval { label: l, periods: 1 });
                None
            }
            (Some(cur), l) if l.is_none() || l == Some(cur.label) => {
                cur.periods += 1;
                None
            }
            (Some(cur), Some(l)) => {
                let done = *cur;
                *cur = Interval { label: l, periods: 1 };
                if std::mem::take(&mut self.left_censored) {
                    None
                } else {
                    Some(done)
                }
            }
            (Some(_), None) => unreachable!(),
        }
    }

    /// The open interval at the end of the trajectory.
    pub fn finish(self) -> Option<Interval> {
        if self.left_censored {
            None
        } else {
            self.current
        }
    }
}

/// Completed and censored intervals in rescaled time `t = r n`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersistenceRecord {
    pub completed: Vec<f64>,
    pub completed_labels: Vec<u8>,
    pub censored: Vec<f64>,
    pub censored_labels: Vec<u8>,
}

impl PersistenceRecord {
    pub fn summary(&self) -> PersistenceSummary {
        PersistenceSummary {
            n_completed: self.completed.len() as u64,
            sum_completed: self.completed.iter().sum(),
            n_censored: self.censored.len() as u64,
            sum_censored: self.censored.iter().sum(),
        }
    }
}

/// Label sequences per agent (one entry per period) to persistence intervals.
pub fn persistence_times<A>(agents: A, r: f64) -> PersistenceRecord
where
    A: IntoIterator,
    A::Item: IntoIterator<Item = Option<u8>>,
{
    let mut rec = PersistenceRecord::default();
    for labels in agents {
        let mut tracker = PersistenceTracker::default();
        for l in labels {
            if let Some(done) = tracker.observe(l) {
                rec.completed.push(r * done.periods as f64);
                rec.completed_labels.push(done.label);
            }
        }
        if let Some(open) = tracker.finish() {
            rec.censored.push(r * open.periods as f64);
            rec.censored_labels.push(open.label);
        }
    }
    rec
}

/// Aggregate persistence statistics, mergeable across runs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PersistenceSummary {
    pub n_completed: u64,
    pub sum_completed: f64,
    pub n_censored: u64,
    pub sum_censored: f64,
}

impl PersistenceSummary {
    pub fn add_completed(&mut self, t: f64) {
        self.n_completed += 1;
        self.sum_completed += t;
    }

    pub fn add_censored(&mut self, t: f64) {
        self.n_censored += 1;
        self.sum_censored += t;
    }

    pub fn merge(&mut self, other: &PersistenceSummary) {
        self.n_completed += other.n_completed;
        self.sum_completed += other.sum_completed;
        self.n_censored += other.n_censored;
        self.sum_censored += other.sum_censored;
    }

    /// Mean length over all intervals, censored ones counted at their
    /// truncated length. Bounded by the run length, so it saturates when
    /// agents stop switching.
    pub fn mean_duration(&self) -> f64 {
        let n = self.n_completed + self.n_censored;
        if n == 0 {
            f64::NAN
        } else {
            (self.sum_completed + self.sum_censored) / n as f64
        }
    }

    /// Mean over completed intervals only; NaN if none completed.
    pub fn mean_completed(&self) -> f64 {
        if self.n_completed == 0 {
            f64::NAN
        } else {
            self.sum_completed / self.n_completed as f64
        }
    }

    /// Share of intervals still open at the horizon.
    pub fn censored_fraction(&self) -> f64 {
        let total = self.n_completed + self.n_censored;
        if total == 0 {
            0.0
        } else {
            self.n_censored as f64 / total as f64
        }
    }

    /// With most intervals censored the completed mean underestimates the
    /// true persistence time.
    pub fn is_lower_bound(&self) -> bool {
        self.censored_fraction() > 0.5
    }
}

/// Rectangular 2-D histogram with equal-width bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2d {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    /// Row-major by x: `counts[ix * ny + iy]`.
    pub counts: Vec<u64>,
}

impl Histogram2d {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Self {
        assert!(nx > 0 && ny > 0, "histogram needs at least one bin per axis");
        Histogram2d { x_range, y_range, nx, ny, counts: vec![0; nx * ny] }
    }

    /// Histogram spanning the data range of each axis.
    pub fn from_samples(xs: &[f64], ys: &[f64], nx: usize, ny: usize) -> Self {
        assert_eq!(xs.len(), ys.len());
        let mut h = Histogram2d::new(data_range(xs), data_range(ys), nx, ny);
        for (&x, &y) in xs.iter().zip(ys) {
            h.add(x, y);
        }
        h
    }

    fn bin(v: f64, (lo, hi): (f64, f64), n: usize) -> Option<usize> {
        if !(v >= lo && v <= hi) {
            return None;
        }
        let i = ((v - lo) / (hi - lo) * n as f64) as usize;
        Some(i.min(n - 1))
    }

    /// Adds a sample; values outside the ranges are ignored.
    pub fn add(&mut self, x: f64, y: f64) {
        if let (Some(ix), Some(iy)) = (
            Self::bin(x, self.x_range, self.nx),
            Self::bin(y, self.y_range, self.ny),
        ) {
            self.counts[ix * self.ny + iy] += 1;
        }
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.ny + iy]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn x_low(&self, ix: usize) -> f64 {
        self.x_range.0 + (self.x_range.1 - self.x_range.0) * ix as f64 / self.nx as f64
    }

    fn y_low(&self, iy: usize) -> f64 {
        self.y_range.0 + (self.y_range.1 - self.y_range.0) * iy as f64 / self.ny as f64
    }

    /// Connected regions (8-neighbourhood) of bins whose count is at least
    /// `fraction` of the maximum count.
    pub fn regions_above(&self, fraction: f64) -> usize {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        if max == 0 {
            return 0;
        }
        let threshold = fraction * max as f64;
        let hot: Vec<bool> = self.counts.iter().map(|&c| c as f64 >= threshold).collect();
        let mut seen = vec![false; hot.len()];
        let mut regions = 0;
        let mut stack = Vec::new();
        for start in 0..hot.len() {
            if !hot[start] || seen[start] {
                continue;
            }
            regions += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (ix, iy) = ((k / self.ny) as isize, (k % self.ny) as isize);
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        let (jx, jy) = (ix + dx, iy + dy);
                        if jx < 0 || jy < 0 || jx >= self.nx as isize || jy >= self.ny as isize {
                            continue;
                        }
                        let j = jx as usize * self.ny + jy as usize;
                        if hot[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        regions
    }

    /// CSV with columns `bin_x_low,bin_y_low,count`, x-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_x_low,bin_y_low,count")?;
        for ix in 0..self.nx {
            for iy in 0..self.ny {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_float(self.x_low(ix)),
                    fmt_float(self.y_low(iy)),
                    self.count(ix, iy)
                )?;
            }
        }
        Ok(())
    }
}

/// `(min, max)` of finite values, widened to unit width if degenerate.
fn data_range(v: &[f64]) -> (f64, f64) {
    let (lo, hi) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if !(lo < hi) {
        let c = if lo.is_finite() { lo } else { 0.0 };
        (c - 0.5, c + 0.5)
    } else {
        (lo, hi)
    }
}
