//! Core geometric and temporal types: boxes, supports, tubes, intervals.
//!
//! Every type validates its invariants at construction, so the metric
//! kernels built on top can assume well-formed inputs.

use crate::error::Error;
use crate::Result;
use std::collections::BTreeMap;

/// Default sampling rate for box tubes, in frames per second.
pub const TUBE_SAMPLING_RATE_HZ: u32 = 1;

// ---------------------------------------------------------------------------
// Bounding boxes
// ---------------------------------------------------------------------------

/// An axis-aligned box in normalised image coordinates.
///
/// Coordinates satisfy `0 <= x0 <= x1 <= 1` and `0 <= y0 <= y1 <= 1`.
/// Degenerate boxes (zero width or height) are permitted; they have zero
/// area and zero overlap with everything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

/// What [`BoundingBox::sanitize`] had to fix to make a box valid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SanitizeFlags {
    /// At least one coordinate was clamped into `[0, 1]`.
    pub clamped: bool,
    /// The corner order was reversed on an axis and had to be swapped.
    pub swapped: bool,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite, out-of-range, or reversed
    /// coordinates.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x0,
            y0,
            x1,
            y1,
            reason,
        };
        if ![x0, y0, x1, y1].iter().all(|c| c.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if [x0, y0, x1, y1].iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(invalid("coordinate outside [0, 1]"));
        }
        if x0 > x1 || y0 > y1 {
            return Err(invalid("reversed corner order"));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Builds a box from untrusted coordinates, clamping each into `[0, 1]`
    /// and swapping reversed corners. Only non-finite input is an error.
    /// The returned flags record which repairs were applied.
    pub fn sanitize(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<(Self, SanitizeFlags)> {
        if ![x0, y0, x1, y1].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidBox {
                x0,
                y0,
                x1,
                y1,
                reason: "non-finite coordinate",
            });
        }
        let mut flags = SanitizeFlags::default();
        let clamp = |c: f64, flags: &mut SanitizeFlags| {
            let v = c.clamp(0.0, 1.0);
            if v != c {
                flags.clamped = true;
            }
            v
        };
        let (mut x0, mut y0) = (clamp(x0, &mut flags), clamp(y0, &mut flags));
        let (mut x1, mut y1) = (clamp(x1, &mut flags), clamp(y1, &mut flags));
        if x0 > x1 {
            std::mem::swap(&mut x0, &mut x1);
            flags.swapped = true;
        }
        if y0 > y1 {
            std::mem::swap(&mut y0, &mut y1);
            flags.swapped = true;
        }
        Ok((Self { x0, y0, x1, y1 }, flags))
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    /// Box area in normalised units; zero for degenerate boxes.
    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    /// Intersection-over-union with another box.
    ///
    /// Returns a value in `[0, 1]`; if the union has zero area (two
    /// degenerate boxes) the overlap is defined as 0.
    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x1.min(other.x1) - self.x0.max(other.x0)).max(0.0);
        let ih = (self.y1.min(other.y1) - self.y0.max(other.y0)).max(0.0);
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Coordinates as `[x0, y0, x1, y1]`.
    pub fn corners(&self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    /// Total order on coordinates, used for deterministic tie-breaking.
    pub(crate) fn cmp_corners(&self, other: &BoundingBox) -> std::cmp::Ordering {
        let a = self.corners();
        let b = other.corners();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }
}

// ---------------------------------------------------------------------------
// Temporal supports
// ---------------------------------------------------------------------------

/// A finite set of sample timestamps (in seconds at the given sampling
/// rate), stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSupport {
    timestamps: Vec<u32>,
    sampling_rate_hz: u32,
}

impl TemporalSupport {
    /// The empty support at the default rate.
    pub fn empty() -> Self {
        Self {
            timestamps: Vec::new(),
            sampling_rate_hz: TUBE_SAMPLING_RATE_HZ,
        }
    }

    /// Builds a support at the default 1 Hz rate; input timestamps are
    /// sorted and deduplicated.
    pub fn from_seconds(timestamps: impl IntoIterator<Item = u32>) -> Self {
        Self::with_rate(timestamps, TUBE_SAMPLING_RATE_HZ).expect("default sampling rate is valid")
    }

    /// Builds a support with an explicit sampling rate (must be >= 1 Hz).
    pub fn with_rate(timestamps: impl IntoIterator<Item = u32>, rate_hz: u32) -> Result<Self> {
        if rate_hz == 0 {
            return Err(Error::Config("sampling rate must be at least 1 Hz".into()));
        }
        let mut timestamps: Vec<u32> = timestamps.into_iter().collect();
        timestamps.sort_unstable();
        timestamps.dedup();
        Ok(Self {
            timestamps,
            sampling_rate_hz: rate_hz,
        })
    }

    pub fn sampling_rate_hz(&self) -> u32 {
        self.sampling_rate_hz
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn contains(&self, t: u32) -> bool {
        self.timestamps.binary_search(&t).is_ok()
    }

    pub fn timestamps(&self) -> &[u32] {
        &self.timestamps
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.timestamps.iter().copied()
    }

    fn check_rate(&self, other: &TemporalSupport) -> Result<()> {
        if self.sampling_rate_hz != other.sampling_rate_hz {
            return Err(Error::RateMismatch {
                left: self.sampling_rate_hz,
                right: other.sampling_rate_hz,
            });
        }
        Ok(())
    }

    /// Set intersection; errors if the sampling rates differ.
    pub fn intersection(&self, other: &TemporalSupport) -> Result<TemporalSupport> {
        self.check_rate(other)?;
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.timestamps.len() && j < other.timestamps.len() {
            match self.timestamps[i].cmp(&other.timestamps[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.timestamps[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(TemporalSupport {
            timestamps: out,
            sampling_rate_hz: self.sampling_rate_hz,
        })
    }

    /// Set union; errors if the sampling rates differ.
    pub fn union(&self, other: &TemporalSupport) -> Result<TemporalSupport> {
        self.check_rate(other)?;
        let mut out = Vec::with_capacity(self.timestamps.len() + other.timestamps.len());
        let (mut i, mut j) = (0, 0);
        while i < self.timestamps.len() && j < other.timestamps.len() {
            match self.timestamps[i].cmp(&other.timestamps[j]) {
                std::cmp::Ordering::Less => {
                    out.push(self.timestamps[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(other.timestamps[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(self.timestamps[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.timestamps[i..]);
        out.extend_from_slice(&other.timestamps[j..]);
        Ok(TemporalSupport {
            timestamps: out,
            sampling_rate_hz: self.sampling_rate_hz,
        })
    }
}

// ---------------------------------------------------------------------------
// Box tubes
// ---------------------------------------------------------------------------

/// A box tube: one bounding box per timestamp of a temporal support.
#[derive(Debug, Clone, PartialEq)]
pub struct Tube {
    support: TemporalSupport,
    boxes: Vec<BoundingBox>,
}

impl Tube {
    /// The empty tube (no timestamps, no boxes).
    pub fn empty() -> Self {
        Self {
            support: TemporalSupport::empty(),
            boxes: Vec::new(),
        }
    }

    /// Builds a tube; `boxes[i]` belongs to `support.timestamps()[i]`.
    pub fn new(support: TemporalSupport, boxes: Vec<BoundingBox>) -> Result<Self> {
        if support.len() != boxes.len() {
            return Err(Error::TubeShape {
                n_boxes: boxes.len(),
                n_timestamps: support.len(),
            });
        }
        Ok(Self { support, boxes })
    }

    pub fn support(&self) -> &TemporalSupport {
        &self.support
    }

    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Box at timestamp `t`, if the tube covers it.
    pub fn box_at(&self, t: u32) -> Option<&BoundingBox> {
        self.support
            .timestamps()
            .binary_search(&t)
            .ok()
            .map(|i| &self.boxes[i])
    }

    /// Iterates `(timestamp, box)` pairs in ascending timestamp order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &BoundingBox)> + '_ {
        self.support.iter().zip(self.boxes.iter())
    }

    /// Mean box area over the tube, or `None` for an empty tube.
    pub fn mean_box_area(&self) -> Option<f64> {
        if self.boxes.is_empty() {
            return None;
        }
        Some(self.boxes.iter().map(BoundingBox::area).sum::<f64>() / self.boxes.len() as f64)
    }
}

/// Incremental [`Tube`] construction with order-independent resolution of
/// timestamp collisions.
///
/// When two boxes land on the same timestamp, the one with the larger area
/// is kept; exact area ties keep the box with the smaller coordinate tuple.
/// The same final tube is therefore produced regardless of insertion order.
#[derive(Debug, Default)]
pub struct TubeBuilder {
    entries: BTreeMap<u32, BoundingBox>,
    collisions: u32,
}

impl TubeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a box at `t`; returns `true` if this collided with an
    /// existing entry.
    pub fn insert(&mut self, t: u32, bb: BoundingBox) -> bool {
        match self.entries.entry(t) {
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(bb);
                false
            }
            std::collections::btree_map::Entry::Occupied(mut slot) => {
                self.collisions += 1;
                let keep_new = match bb.area().total_cmp(&slot.get().area()) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Less => false,
                    std::cmp::Ordering::Equal => {
                        bb.cmp_corners(slot.get()) == std::cmp::Ordering::Less
                    }
                };
                if keep_new {
                    slot.insert(bb);
                }
                true
            }
        }
    }

    /// Number of timestamp collisions seen so far.
    pub fn collisions(&self) -> u32 {
        self.collisions
    }

    /// Finishes construction, returning the tube and the collision count.
    pub fn build(self) -> (Tube, u32) {
        let (timestamps, boxes): (Vec<u32>, Vec<BoundingBox>) = self.entries.into_iter().unzip();
        let tube = Tube {
            support: TemporalSupport::from_seconds(timestamps),
            boxes,
        };
        (tube, self.collisions)
    }
}

// ---------------------------------------------------------------------------
// Continuous-time intervals
// ---------------------------------------------------------------------------

/// A closed interval `[start, end]` in seconds, with `0 <= start <= end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    start: f64,
    end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        let invalid = |reason| Error::MalformedInterval { start, end, reason };
        if !start.is_finite() || !end.is_finite() {
            return Err(invalid("non-finite endpoint"));
        }
        if start < 0.0 {
            return Err(invalid("negative start"));
        }
        if start > end {
            return Err(invalid("start after end"));
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Interval length in seconds (zero for point intervals).
    pub fn measure(&self) -> f64 {
        self.end - self.start
    }

    /// Length of the overlap with another interval.
    pub fn intersection_measure(&self, other: &Interval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// A normalised union of intervals: sorted by start, with overlapping or
/// touching members merged.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a normalised set from raw `(start, end)` pairs.
    ///
    /// Each pair is validated as an [`Interval`]; the result is sorted and
    /// merged, so the same set of pairs yields the same value in any order.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let mut intervals = pairs
            .into_iter()
            .map(|(s, e)| Interval::new(s, e))
            .collect::<Result<Vec<_>>>()?;
        intervals.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.start <= last.end => {
                    last.end = last.end.max(iv.end);
                }
                _ => merged.push(iv),
            }
        }
        Ok(Self { intervals: merged })
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Total length in seconds.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(Interval::measure).sum()
    }

    /// Length of the intersection with another normalised set.
    pub fn intersection_measure(&self, other: &IntervalSet) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut total = 0.0;
        while i < self.intervals.len() && j < other.intervals.len() {
            let a = &self.intervals[i];
            let b = &other.intervals[j];
            total += a.intersection_measure(b);
            if a.end <= b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        total
    }

    /// Length of the union with another normalised set.
    pub fn union_measure(&self, other: &IntervalSet) -> f64 {
        self.measure() + other.measure() - self.intersection_measure(other)
    }

    /// Raw `(start, end)` pairs of the normalised set.
    pub fn to_pairs(&self) -> Vec<(f64, f64)> {
        self.intervals.iter().map(|iv| (iv.start, iv.end)).collect()
    }

    /// Samples the set at 1 Hz: each interval contributes the inclusive
    /// integer range from `round(start)` to `round(end)`, rounding half up.
    pub fn discretize(&self) -> TemporalSupport {
        let mut seconds = Vec::new();
        for iv in &self.intervals {
            let lo = round_half_up(iv.start);
            let hi = round_half_up(iv.end);
            seconds.extend(lo..=hi);
        }
        TemporalSupport::from_seconds(seconds)
    }
}

/// Rounds a non-negative value to the nearest integer, with exact halves
/// rounding up (`2.5 -> 3`).
pub fn round_half_up(x: f64) -> u32 {
    debug_assert!(x >= 0.0 && x.is_finite());
    (x + 0.5).floor() as u32
}
