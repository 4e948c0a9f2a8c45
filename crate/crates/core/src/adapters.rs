//! Adapters that normalise heterogeneous raw model output into canonical
//! metric inputs.
//!
//! Each supported model family ("dialect") emits grounding results in its
//! own representation:
//!
//! * `vidi` — box tubes as JSON `[{"time": 30, "box": [x0,y0,x1,y1]}]` with
//!   coordinates already in `[0, 1]`; time ranges as `MM:SS` (or
//!   `HH:MM:SS`) pairs in text.
//! * `gemini` — box tubes as JSON `[{"timestamp": "MM:SS", "box_2d":
//!   [0..1000]}]`; time ranges as `HH:MM:SS` pairs in text.
//! * `gpt` — box tubes as JSON `[{"frame": 3, "box": [0..1]}]` over sampled
//!   frame indices; time ranges as frame-index pairs like `2-4, 6-8`. Frame
//!   indices map to seconds through a [`FrameSamplingPolicy`].
//! * `qwen` — box tubes as JSON `[{"time": 1.0, "bbox_2d": [0..1000]}]`
//!   with float seconds; time ranges as float-second pairs (JSON or text).
//!
//! Parsers are total: any byte sequence produces either a canonical value
//! (possibly with repair warnings) or a typed parse error — never a panic.
//! Structural problems (payload is not the expected JSON shape) are errors;
//! value-level problems are repaired or dropped and counted as warnings:
//! out-of-range coordinates clamp, reversed corners swap, malformed times
//! and ranges drop, colliding timestamps keep the larger box.

use crate::dataset::{GroundTruth, QueryAnnotation, Task};
use crate::error::{excerpt, Error};
use crate::model::{round_half_up, BoundingBox, IntervalSet, Tube, TubeBuilder};
use crate::plot::{TimedBox, TranscriptSegment, BOX_TIMESTAMP_TOLERANCE_S};
use crate::wire::{WireSegment, WireTube};
use crate::Result;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

// ---------------------------------------------------------------------------
// Dialects, warnings, parse results
// ---------------------------------------------------------------------------

/// Model-output format family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dialect {
    Vidi,
    Gemini,
    Gpt,
    Qwen,
}

impl Dialect {
    pub fn name(&self) -> &'static str {
        match self {
            Dialect::Vidi => "vidi",
            Dialect::Gemini => "gemini",
            Dialect::Gpt => "gpt",
            Dialect::Qwen => "qwen",
        }
    }

    pub const ALL: [Dialect; 4] = [Dialect::Vidi, Dialect::Gemini, Dialect::Gpt, Dialect::Qwen];
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vidi" => Ok(Dialect::Vidi),
            "gemini" => Ok(Dialect::Gemini),
            "gpt" => Ok(Dialect::Gpt),
            "qwen" => Ok(Dialect::Qwen),
            other => Err(Error::Config(format!(
                "unknown dialect {other:?} (expected vidi, gemini, gpt, or qwen)"
            ))),
        }
    }
}

/// Non-fatal repairs applied while normalising a payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum WarningKind {
    /// A coordinate was clamped into `[0, 1]`.
    ClampedCoordinate,
    /// Box corners arrived reversed and were swapped.
    ReversedBox,
    /// Two boxes landed on the same timestamp; the larger one was kept.
    DuplicateTimestamp,
    /// A frame index beyond the sampling cap was skipped.
    SkippedFrame,
    /// A time, range, or segment span was invalid and was dropped.
    MalformedRange,
    /// No usable range was found in a time-range payload.
    NoParsableRange,
    /// A segment box fell outside its segment's window and was dropped.
    DroppedBox,
    /// Multiple prediction records for one query disagreed.
    ConflictingAnswers,
    /// Multiple prediction records for one query were merged.
    MergedRecords,
}

impl WarningKind {
    pub fn label(&self) -> &'static str {
        match self {
            WarningKind::ClampedCoordinate => "clamped_coordinate",
            WarningKind::ReversedBox => "reversed_box",
            WarningKind::DuplicateTimestamp => "duplicate_timestamp",
            WarningKind::SkippedFrame => "skipped_frame",
            WarningKind::MalformedRange => "malformed_range",
            WarningKind::NoParsableRange => "no_parsable_range",
            WarningKind::DroppedBox => "dropped_box",
            WarningKind::ConflictingAnswers => "conflicting_answers",
            WarningKind::MergedRecords => "merged_records",
        }
    }
}

/// Multiset of warnings accumulated during one parse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WarningSet(BTreeMap<WarningKind, u64>);

impl WarningSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, kind: WarningKind) {
        self.add_n(kind, 1);
    }

    pub fn add_n(&mut self, kind: WarningKind, n: u64) {
        if n > 0 {
            *self.0.entry(kind).or_insert(0) += n;
        }
    }

    pub fn merge(&mut self, other: &WarningSet) {
        for (&kind, &n) in &other.0 {
            self.add_n(kind, n);
        }
    }

    pub fn count(&self, kind: WarningKind) -> u64 {
        self.0.get(&kind).copied().unwrap_or(0)
    }

    pub fn has(&self, kind: WarningKind) -> bool {
        self.count(kind) > 0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WarningKind, u64)> + '_ {
        self.0.iter().map(|(&k, &n)| (k, n))
    }
}

/// A normalised value together with the repairs applied to produce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: WarningSet,
}

impl<T> Parsed<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: WarningSet::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Frame sampling policy
// ---------------------------------------------------------------------------

/// How a frame-indexed dialect sampled video frames, used to convert frame
/// indices back to seconds.
///
/// Videos short enough to fit under the frame cap at the native rate are
/// sampled directly (`t = frame / fps`); longer videos are uniformly
/// subsampled to exactly `frame_cap` frames (`t = round(frame * duration /
/// frame_cap)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSamplingPolicy {
    duration_s: f64,
    frame_cap: u32,
    fps: f64,
}

/// Per-record sampling context carried by raw prediction files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingContext {
    pub duration_s: f64,
    #[serde(default = "default_frame_cap")]
    pub frame_cap: u32,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_frame_cap() -> u32 {
    FrameSamplingPolicy::DEFAULT_FRAME_CAP
}

fn default_fps() -> f64 {
    FrameSamplingPolicy::DEFAULT_FPS
}

impl FrameSamplingPolicy {
    pub const DEFAULT_FRAME_CAP: u32 = 120;
    pub const DEFAULT_FPS: f64 = 1.0;

    pub fn new(duration_s: f64, frame_cap: u32, fps: f64) -> Result<Self> {
        if !duration_s.is_finite() || duration_s <= 0.0 {
            return Err(Error::Config(format!(
                "sampling policy needs a positive video duration, got {duration_s}"
            )));
        }
        if frame_cap == 0 {
            return Err(Error::Config("frame cap must be at least 1".into()));
        }
        if !fps.is_finite() || fps <= 0.0 {
            return Err(Error::Config(format!(
                "sampling policy needs a positive fps, got {fps}"
            )));
        }
        Ok(Self {
            duration_s,
            frame_cap,
            fps,
        })
    }

    /// Policy with the default cap and rate for a video of this length.
    pub fn for_video(duration_s: f64) -> Result<Self> {
        Self::new(duration_s, Self::DEFAULT_FRAME_CAP, Self::DEFAULT_FPS)
    }

    pub fn from_context(context: &SamplingContext) -> Result<Self> {
        Self::new(context.duration_s, context.frame_cap, context.fps)
    }

    pub fn frame_cap(&self) -> u32 {
        self.frame_cap
    }

    fn is_direct(&self) -> bool {
        self.duration_s < self.frame_cap as f64 / self.fps
    }

    /// Maps a frame index to whole seconds; `None` when the index is at or
    /// beyond the frame cap.
    pub fn seconds_for_frame(&self, frame: u32) -> Option<u32> {
        if frame >= self.frame_cap {
            return None;
        }
        let t = if self.is_direct() {
            frame as f64 / self.fps
        } else {
            frame as f64 * self.duration_s / self.frame_cap as f64
        };
        Some(round_half_up(t))
    }

    /// Inverse of [`Self::seconds_for_frame`] where one exists.
    pub fn frame_for_seconds(&self, t: u32) -> Option<u32> {
        let guess = if self.is_direct() {
            t as f64 * self.fps
        } else {
            t as f64 * self.frame_cap as f64 / self.duration_s
        };
        let frame = round_half_up(guess);
        (self.seconds_for_frame(frame) == Some(t)).then_some(frame)
    }
}

// ---------------------------------------------------------------------------
// Payload scavenging helpers
// ---------------------------------------------------------------------------

fn fence_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```[a-zA-Z]*\s*(.*?)```").expect("static regex"))
}

/// Pulls the first well-formed JSON value out of a payload: the payload
/// itself, a fenced code block, or the first balanced bracket region.
fn extract_json(payload: &str) -> Option<serde_json::Value> {
    let trimmed = payload.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    for cap in fence_regex().captures_iter(payload) {
        if let Ok(v) = serde_json::from_str(cap[1].trim()) {
            return Some(v);
        }
    }
    balanced_json(payload)
}

fn balanced_json(payload: &str) -> Option<serde_json::Value> {
    let bytes = payload.as_bytes();
    let mut attempts = 0;
    for start in 0..bytes.len() {
        if bytes[start] != b'[' && bytes[start] != b'{' {
            continue;
        }
        if let Some(end) = balanced_end(bytes, start) {
            if let Ok(v) = serde_json::from_str(&payload[start..=end]) {
                return Some(v);
            }
        }
        attempts += 1;
        if attempts >= 8 {
            break;
        }
    }
    None
}

fn balanced_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0i64;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
                if depth < 0 {
                    return None;
                }
            }
            _ => {}
        }
    }
    None
}

/// Normalises a parsed payload into a list of entry objects: a JSON array
/// is used as-is, an object whose only field is an array (a wrapper like
/// `{"detections": [...]}`) unwraps to it, and any other object counts as
/// a single entry.
fn entry_array(value: serde_json::Value) -> Vec<serde_json::Value> {
    match value {
        serde_json::Value::Array(entries) => entries,
        serde_json::Value::Object(map) => {
            if map.len() == 1 {
                if let Some(serde_json::Value::Array(_)) = map.values().next() {
                    let serde_json::Value::Array(entries) =
                        map.into_iter().next().expect("length checked").1
                    else {
                        unreachable!("checked to be an array");
                    };
                    return entries;
                }
            }
            vec![serde_json::Value::Object(map)]
        }
        other => vec![other],
    }
}

/// Parses `MM:SS` or `HH:MM:SS` into seconds. Every part except the most
/// significant must stay below 60.
fn parse_colon_time(s: &str) -> Option<u32> {
    let parts: Vec<&str> = s.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let mut total: u64 = 0;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() || part.len() > 9 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let value: u64 = part.parse().ok()?;
        if i > 0 && value > 59 {
            return None;
        }
        total = total * 60 + value;
    }
    u32::try_from(total).ok()
}

/// Formats seconds as zero-padded `MM:SS` (under an hour) or `HH:MM:SS`.
pub fn format_timestamp(seconds: u32) -> String {
    if seconds < 3600 {
        format!("{:02}:{:02}", seconds / 60, seconds % 60)
    } else {
        format!(
            "{:02}:{:02}:{:02}",
            seconds / 3600,
            (seconds % 3600) / 60,
            seconds % 60
        )
    }
}

fn dialect_error(dialect: Dialect, payload: &str, message: impl Into<String>) -> Error {
    Error::DialectParse {
        dialect: dialect.name(),
        message: message.into(),
        excerpt: excerpt(payload),
    }
}

fn entry_f64(entry: &serde_json::Value, key: &str) -> Option<f64> {
    entry.get(key).and_then(serde_json::Value::as_f64)
}

fn entry_box(entry: &serde_json::Value, key: &str) -> Option<[f64; 4]> {
    let arr = entry.get(key)?.as_array()?;
    if arr.len() != 4 {
        return None;
    }
    let mut out = [0.0; 4];
    for (slot, v) in out.iter_mut().zip(arr) {
        *slot = v.as_f64()?;
    }
    Some(out)
}

/// Scales raw coordinates into `[0, 1]`, clamping and fixing reversed
/// corners with warnings. `None` for non-finite input.
fn sanitize_box(raw: [f64; 4], scale: f64, warnings: &mut WarningSet) -> Option<BoundingBox> {
    let [x0, y0, x1, y1] = raw.map(|c| c / scale);
    let (bb, flags) = BoundingBox::sanitize(x0, y0, x1, y1).ok()?;
    if flags.clamped {
        warnings.add(WarningKind::ClampedCoordinate);
    }
    if flags.swapped {
        warnings.add(WarningKind::ReversedBox);
    }
    Some(bb)
}

// ---------------------------------------------------------------------------
// Tube parsing
// ---------------------------------------------------------------------------

/// Parses a box-tube payload in the given dialect. The `gpt` dialect needs
/// a sampling policy to map frame indices to seconds.
pub fn parse_tube(
    dialect: Dialect,
    payload: &str,
    policy: Option<&FrameSamplingPolicy>,
) -> Result<Parsed<Tube>> {
    let value = extract_json(payload)
        .ok_or_else(|| dialect_error(dialect, payload, "payload contains no JSON value"))?;
    let entries = entry_array(value);
    let mut warnings = WarningSet::new();
    let mut builder = TubeBuilder::new();

    for entry in &entries {
        if !entry.is_object() {
            return Err(dialect_error(
                dialect,
                payload,
                format!("expected an object entry, got {entry}"),
            ));
        }
        let (t, raw_box, scale) = match dialect {
            Dialect::Vidi => {
                let raw_box = entry_box(entry, "box").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a 4-number \"box\"")
                })?;
                let t = entry_f64(entry, "time").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a numeric \"time\"")
                })?;
                if !t.is_finite() || t < 0.0 || t.fract() != 0.0 {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                }
                (t as u32, raw_box, 1.0)
            }
            Dialect::Gemini => {
                let raw_box = entry_box(entry, "box_2d").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a 4-number \"box_2d\"")
                })?;
                let ts = entry.get("timestamp").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing \"timestamp\"")
                })?;
                let seconds = match ts {
                    serde_json::Value::String(s) => parse_colon_time(s.trim()),
                    serde_json::Value::Number(n) => n
                        .as_f64()
                        .filter(|v| v.is_finite() && *v >= 0.0)
                        .map(round_half_up),
                    _ => None,
                };
                let Some(seconds) = seconds else {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                };
                (seconds, raw_box, 1000.0)
            }
            Dialect::Gpt => {
                let policy = policy.ok_or_else(|| {
                    Error::Config("gpt payloads need a frame sampling policy".into())
                })?;
                let raw_box = entry_box(entry, "box").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a 4-number \"box\"")
                })?;
                let frame = entry_f64(entry, "frame").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a numeric \"frame\"")
                })?;
                if !frame.is_finite() || frame < 0.0 || frame.fract() != 0.0 {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                }
                match policy.seconds_for_frame(frame as u32) {
                    Some(t) => (t, raw_box, 1.0),
                    None => {
                        warnings.add(WarningKind::SkippedFrame);
                        continue;
                    }
                }
            }
            Dialect::Qwen => {
                let raw_box = entry_box(entry, "bbox_2d").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a 4-number \"bbox_2d\"")
                })?;
                let t = entry_f64(entry, "time").ok_or_else(|| {
                    dialect_error(dialect, payload, "entry is missing a numeric \"time\"")
                })?;
                if !t.is_finite() || t < 0.0 {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                }
                (round_half_up(t), raw_box, 1000.0)
            }
        };
        let Some(bb) = sanitize_box(raw_box, scale, &mut warnings) else {
            warnings.add(WarningKind::MalformedRange);
            continue;
        };
        builder.insert(t, bb);
    }

    let (tube, collisions) = builder.build();
    warnings.add_n(WarningKind::DuplicateTimestamp, u64::from(collisions));
    Ok(Parsed {
        value: tube,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Time-range parsing
// ---------------------------------------------------------------------------

fn colon_range_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\d{1,9}(?::\d{1,2}){1,2})\s*(?:-|–|—|~|to)\s*(\d{1,9}(?::\d{1,2}){1,2})")
            .expect("static regex")
    })
}

fn int_range_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(\d{1,9})\s*(?:-|–|—|~|to)\s*(\d{1,9})").expect("static regex"))
}

fn float_range_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(\d{1,9}(?:\.\d{1,6})?)\s*(?:-|–|—|~|to)\s*(\d{1,9}(?:\.\d{1,6})?)")
            .expect("static regex")
    })
}

/// Parses a time-range payload into a normalised interval set.
///
/// This never fails on content: payloads with no usable range produce an
/// empty set carrying a [`WarningKind::NoParsableRange`] flag (such queries
/// score zero). The `gpt` dialect needs a sampling policy; omitting it is a
/// configuration error.
pub fn parse_time_ranges(
    dialect: Dialect,
    payload: &str,
    policy: Option<&FrameSamplingPolicy>,
) -> Result<Parsed<IntervalSet>> {
    let mut warnings = WarningSet::new();
    let mut pairs: Vec<(f64, f64)> = Vec::new();

    match dialect {
        Dialect::Vidi | Dialect::Gemini => {
            for cap in colon_range_regex().captures_iter(payload) {
                match (parse_colon_time(&cap[1]), parse_colon_time(&cap[2])) {
                    (Some(start), Some(end)) if start <= end => {
                        pairs.push((f64::from(start), f64::from(end)));
                    }
                    _ => warnings.add(WarningKind::MalformedRange),
                }
            }
        }
        Dialect::Gpt => {
            let policy = policy
                .ok_or_else(|| Error::Config("gpt payloads need a frame sampling policy".into()))?;
            for cap in int_range_regex().captures_iter(payload) {
                let frames = (cap[1].parse::<u32>().ok(), cap[2].parse::<u32>().ok());
                let (Some(a), Some(b)) = frames else {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                };
                if a > b {
                    warnings.add(WarningKind::MalformedRange);
                    continue;
                }
                match (policy.seconds_for_frame(a), policy.seconds_for_frame(b)) {
                    (Some(start), Some(end)) => {
                        pairs.push((f64::from(start), f64::from(end)));
                    }
                    _ => warnings.add(WarningKind::SkippedFrame),
                }
            }
        }
        Dialect::Qwen => {
            if let Some(value) = extract_json(payload) {
                for entry in entry_array(value) {
                    let pair = match &entry {
                        serde_json::Value::Array(a) if a.len() == 2 => {
                            match (a[0].as_f64(), a[1].as_f64()) {
                                (Some(s), Some(e)) => Some((s, e)),
                                _ => None,
                            }
                        }
                        serde_json::Value::Object(_) => {
                            match (entry_f64(&entry, "start"), entry_f64(&entry, "end")) {
                                (Some(s), Some(e)) => Some((s, e)),
                                _ => None,
                            }
                        }
                        _ => None,
                    };
                    match pair {
                        Some((s, e)) if s.is_finite() && e.is_finite() && 0.0 <= s && s <= e => {
                            pairs.push((s, e));
                        }
                        _ => warnings.add(WarningKind::MalformedRange),
                    }
                }
            } else {
                for cap in float_range_regex().captures_iter(payload) {
                    let bounds = (cap[1].parse::<f64>().ok(), cap[2].parse::<f64>().ok());
                    match bounds {
                        (Some(s), Some(e)) if s <= e => pairs.push((s, e)),
                        _ => warnings.add(WarningKind::MalformedRange),
                    }
                }
            }
        }
    }

    if pairs.is_empty() {
        warnings.add(WarningKind::NoParsableRange);
        return Ok(Parsed {
            value: IntervalSet::empty(),
            warnings,
        });
    }
    let value = IntervalSet::from_pairs(pairs).expect("pairs validated before normalisation");
    Ok(Parsed { value, warnings })
}

// ---------------------------------------------------------------------------
// Transcript segment parsing
// ---------------------------------------------------------------------------

/// Parses a character-track payload: transcript segments with optional box
/// tracks, in the shared `{"text", "start", "end", "boxes"}` shape with
/// `[0, 1]` coordinates.
///
/// Segments with invalid spans and boxes outside their segment's window
/// are dropped with warnings; coordinates are clamped.
pub fn parse_char_segments(payload: &str) -> Result<Parsed<Vec<TranscriptSegment>>> {
    let dialect_name = "segments";
    let value = extract_json(payload).ok_or_else(|| Error::DialectParse {
        dialect: dialect_name,
        message: "payload contains no JSON value".into(),
        excerpt: excerpt(payload),
    })?;
    let mut warnings = WarningSet::new();
    let mut segments = Vec::new();

    for entry in entry_array(value) {
        let obj = entry.as_object().ok_or_else(|| Error::DialectParse {
            dialect: dialect_name,
            message: format!("expected a segment object, got {entry}"),
            excerpt: excerpt(payload),
        })?;
        let text = obj
            .get("text")
            .and_then(serde_json::Value::as_str)
            .ok_or_else(|| Error::DialectParse {
                dialect: dialect_name,
                message: "segment is missing a string \"text\"".into(),
                excerpt: excerpt(payload),
            })?;
        let (start, end) = match (entry_f64(&entry, "start"), entry_f64(&entry, "end")) {
            (Some(s), Some(e)) => (s, e),
            _ => {
                return Err(Error::DialectParse {
                    dialect: dialect_name,
                    message: "segment is missing numeric \"start\"/\"end\"".into(),
                    excerpt: excerpt(payload),
                })
            }
        };
        if !start.is_finite() || !end.is_finite() || start < 0.0 || start > end {
            warnings.add(WarningKind::MalformedRange);
            continue;
        }

        let mut boxes = Vec::new();
        if let Some(raw_boxes) = obj.get("boxes") {
            let raw_boxes = raw_boxes.as_array().ok_or_else(|| Error::DialectParse {
                dialect: dialect_name,
                message: "segment \"boxes\" must be an array".into(),
                excerpt: excerpt(payload),
            })?;
            for raw in raw_boxes {
                let timestamp = entry_f64(raw, "timestamp");
                let corners = entry_box(raw, "box_2d");
                let (Some(timestamp), Some(corners)) = (timestamp, corners) else {
                    warnings.add(WarningKind::DroppedBox);
                    continue;
                };
                let in_window = timestamp.is_finite()
                    && timestamp >= 0.0
                    && timestamp >= start - BOX_TIMESTAMP_TOLERANCE_S
                    && timestamp <= end + BOX_TIMESTAMP_TOLERANCE_S;
                if !in_window {
                    warnings.add(WarningKind::DroppedBox);
                    continue;
                }
                let Some(bb) = sanitize_box(corners, 1.0, &mut warnings) else {
                    warnings.add(WarningKind::DroppedBox);
                    continue;
                };
                boxes.push(TimedBox {
                    timestamp_s: timestamp,
                    bbox: bb,
                });
            }
        }

        segments.push(
            TranscriptSegment::new(start, end, text, boxes)
                .expect("segment fields validated before construction"),
        );
    }

    Ok(Parsed {
        value: segments,
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Multiple-choice answer extraction
// ---------------------------------------------------------------------------

fn fold_text(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Extracts a multiple-choice answer index from free-form text.
///
/// A leading option letter (`B`, `b)`, `(C)`, `D.`) wins if it is not part
/// of a word and indexes an existing option; otherwise the whole payload is
/// compared against each option's text after case and whitespace folding.
/// Returns `None` (an absent answer, scored incorrect) when neither rule
/// applies.
pub fn extract_mc_answer(payload: &str, options: &[String]) -> Option<usize> {
    let text = payload
        .trim()
        .trim_matches(|c: char| matches!(c, '*' | '#' | '`' | '"' | '\''))
        .trim();

    // Rule 1: a leading option letter.
    let mut chars = text.chars().peekable();
    let mut candidate = None;
    if chars.peek() == Some(&'(') {
        chars.next();
    }
    if let Some(letter) = chars.next() {
        let upper = letter.to_ascii_uppercase();
        if ('A'..='E').contains(&upper) {
            let index = (upper as u8 - b'A') as usize;
            // Emphasis may wrap just the letter ("**B.** they hiked"), so
            // skip it around the optional punctuation, not only at the ends
            // of the payload.
            let skip_emphasis = |chars: &mut std::iter::Peekable<std::str::Chars>| {
                while chars
                    .peek()
                    .is_some_and(|c| matches!(c, '*' | '`' | '"' | '\''))
                {
                    chars.next();
                }
            };
            skip_emphasis(&mut chars);
            if let Some(&next) = chars.peek() {
                if matches!(next, ')' | ']' | '.' | ':' | ',' | ';') {
                    chars.next();
                }
            }
            skip_emphasis(&mut chars);
            match chars.next() {
                None => candidate = Some(index),
                Some(c) if c.is_whitespace() => candidate = Some(index),
                _ => {}
            }
        }
    }
    if let Some(index) = candidate {
        if index < options.len() {
            return Some(index);
        }
    }

    // Rule 2: the payload is (case/whitespace-folded) an option's text.
    let folded = fold_text(text);
    let folded = folded.trim_end_matches('.');
    options
        .iter()
        .position(|opt| fold_text(opt).trim_end_matches('.') == folded)
}

// ---------------------------------------------------------------------------
// Dialect serialisers (fixtures and round-trip checks)
// ---------------------------------------------------------------------------

/// Renders a tube as a raw payload in the given dialect.
///
/// Fails when the dialect cannot represent the tube: `gemini` box
/// coordinates snap to a 1/1000 grid, so only grid-aligned boxes round-trip
/// exactly; `gpt` needs every timestamp to be reachable from some frame
/// index under the policy.
pub fn tube_to_payload(
    dialect: Dialect,
    tube: &Tube,
    policy: Option<&FrameSamplingPolicy>,
) -> Result<String> {
    let mut entries = Vec::with_capacity(tube.len());
    for (t, bb) in tube.iter() {
        let [x0, y0, x1, y1] = bb.corners();
        let entry = match dialect {
            Dialect::Vidi => {
                serde_json::json!({"time": t, "box": [x0, y0, x1, y1]})
            }
            Dialect::Gemini => {
                if t >= 86_400 {
                    return Err(Error::Config(format!(
                        "timestamp {t}s is not representable as HH:MM:SS"
                    )));
                }
                let scaled: Vec<i64> = [x0, y0, x1, y1]
                    .iter()
                    .map(|c| (c * 1000.0).round() as i64)
                    .collect();
                serde_json::json!({"timestamp": format_timestamp(t), "box_2d": scaled})
            }
            Dialect::Gpt => {
                let policy = policy.ok_or_else(|| {
                    Error::Config("gpt payloads need a frame sampling policy".into())
                })?;
                let frame = policy.frame_for_seconds(t).ok_or_else(|| {
                    Error::Config(format!(
                        "no frame index maps to {t}s under the sampling policy"
                    ))
                })?;
                serde_json::json!({"frame": frame, "box": [x0, y0, x1, y1]})
            }
            Dialect::Qwen => {
                let scaled: Vec<i64> = [x0, y0, x1, y1]
                    .iter()
                    .map(|c| (c * 1000.0).round() as i64)
                    .collect();
                serde_json::json!({"time": t as f64, "bbox_2d": scaled})
            }
        };
        entries.push(entry);
    }
    Ok(serde_json::Value::Array(entries).to_string())
}

/// Renders an interval set as a raw time-range payload in the dialect.
pub fn intervals_to_payload(
    dialect: Dialect,
    set: &IntervalSet,
    policy: Option<&FrameSamplingPolicy>,
) -> Result<String> {
    let mut parts = Vec::with_capacity(set.intervals().len());
    for iv in set.intervals() {
        match dialect {
            Dialect::Vidi | Dialect::Gemini => {
                let (s, e) = (iv.start().round(), iv.end().round());
                if s < 0.0 || e >= 86_400.0 {
                    return Err(Error::Config(format!(
                        "interval [{}, {}] is not representable as timestamps",
                        iv.start(),
                        iv.end()
                    )));
                }
                parts.push(format!(
                    "{} - {}",
                    format_timestamp(s as u32),
                    format_timestamp(e as u32)
                ));
            }
            Dialect::Gpt => {
                let policy = policy.ok_or_else(|| {
                    Error::Config("gpt payloads need a frame sampling policy".into())
                })?;
                let to_frame = |t: f64| -> Result<u32> {
                    policy
                        .frame_for_seconds(round_half_up(t.max(0.0)))
                        .ok_or_else(|| {
                            Error::Config(format!(
                                "no frame index maps to {t}s under the sampling policy"
                            ))
                        })
                };
                parts.push(format!("{}-{}", to_frame(iv.start())?, to_frame(iv.end())?));
            }
            Dialect::Qwen => {
                parts.push(format!("[{}, {}]", iv.start(), iv.end()));
            }
        }
    }
    Ok(match dialect {
        Dialect::Qwen => format!("[{}]", parts.join(", ")),
        _ => parts.join(", "),
    })
}

/// Renders transcript segments as a canonical-shape JSON payload.
pub fn segments_to_payload(segments: &[TranscriptSegment]) -> String {
    let wire: Vec<WireSegment> = segments.iter().map(WireSegment::from_segment).collect();
    serde_json::to_string(&wire).expect("segments serialise")
}

// ---------------------------------------------------------------------------
// Prediction records (raw and canonical)
// ---------------------------------------------------------------------------

/// One line of a raw prediction file: unparsed model output for a query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPrediction {
    pub query_id: String,
    /// Verbatim model output.
    pub payload: String,
    /// Frame-sampling parameters, if they differ from the annotation's
    /// video duration with default cap and rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<SamplingContext>,
}

/// Task-specific body of a canonical prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum CanonicalBody {
    Tube(Tube),
    Intervals(IntervalSet),
    Segments(Vec<TranscriptSegment>),
    /// `None` is a refusal; it scores as incorrect.
    Answer(Option<usize>),
}

/// One line of a canonical (dialect-free) prediction file.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalPrediction {
    pub query_id: String,
    pub task: Task,
    pub body: CanonicalBody,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireCanonical {
    query_id: String,
    task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tube: Option<WireTube>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segments: Option<Vec<WireSegment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    answer: Option<usize>,
}

impl CanonicalPrediction {
    /// Serialises to one JSON line. A multiple-choice refusal simply omits
    /// the `answer` field.
    pub fn to_json_line(&self) -> String {
        let mut wire = WireCanonical {
            query_id: self.query_id.clone(),
            task: self.task,
            tube: None,
            intervals: None,
            segments: None,
            answer: None,
        };
        match &self.body {
            CanonicalBody::Tube(tube) => wire.tube = Some(WireTube::from_tube(tube)),
            CanonicalBody::Intervals(set) => {
                wire.intervals = Some(
                    set.intervals()
                        .iter()
                        .map(|iv| [iv.start(), iv.end()])
                        .collect(),
                )
            }
            CanonicalBody::Segments(segments) => {
                wire.segments = Some(segments.iter().map(WireSegment::from_segment).collect())
            }
            CanonicalBody::Answer(answer) => wire.answer = *answer,
        }
        serde_json::to_string(&wire).expect("canonical prediction serialises")
    }
}

/// A prediction-file line in either accepted form.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionRecord {
    Raw(RawPrediction),
    Canonical(CanonicalPrediction),
}

impl PredictionRecord {
    pub fn query_id(&self) -> &str {
        match self {
            PredictionRecord::Raw(r) => &r.query_id,
            PredictionRecord::Canonical(c) => &c.query_id,
        }
    }
}

/// Parses one prediction-file line. Lines holding a `payload` field are raw
/// model output; all other lines must be canonical predictions.
pub fn parse_prediction_line(path: &str, line: usize, text: &str) -> Result<PredictionRecord> {
    let schema_err = |message: String| Error::Schema {
        path: path.to_string(),
        line,
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| schema_err(e.to_string()))?;
    let is_raw = value.as_object().is_some_and(|o| o.contains_key("payload"));
    if is_raw {
        let raw: RawPrediction =
            serde_json::from_value(value).map_err(|e| schema_err(e.to_string()))?;
        if raw.query_id.is_empty() {
            return Err(schema_err("query_id must be non-empty".into()));
        }
        return Ok(PredictionRecord::Raw(raw));
    }

    let wire: WireCanonical =
        serde_json::from_value(value).map_err(|e| schema_err(e.to_string()))?;
    if wire.query_id.is_empty() {
        return Err(schema_err("query_id must be non-empty".into()));
    }
    let mut bodies = 0;
    bodies += usize::from(wire.tube.is_some());
    bodies += usize::from(wire.intervals.is_some());
    bodies += usize::from(wire.segments.is_some());
    bodies += usize::from(wire.answer.is_some());
    let body = match wire.task {
        Task::Stg => {
            let tube = wire
                .tube
                .ok_or_else(|| schema_err("stg prediction needs a \"tube\"".into()))?;
            if bodies != 1 {
                return Err(schema_err(
                    "stg prediction must carry only a \"tube\"".into(),
                ));
            }
            CanonicalBody::Tube(tube.into_tube().map_err(schema_err)?)
        }
        Task::Tr => {
            let intervals = wire
                .intervals
                .ok_or_else(|| schema_err("tr prediction needs \"intervals\"".into()))?;
            if bodies != 1 {
                return Err(schema_err(
                    "tr prediction must carry only \"intervals\"".into(),
                ));
            }
            let set = IntervalSet::from_pairs(intervals.iter().map(|[s, e]| (*s, *e)))
                .map_err(|e| schema_err(e.to_string()))?;
            CanonicalBody::Intervals(set)
        }
        Task::Char => {
            let segments = wire
                .segments
                .ok_or_else(|| schema_err("char prediction needs \"segments\"".into()))?;
            if bodies != 1 {
                return Err(schema_err(
                    "char prediction must carry only \"segments\"".into(),
                ));
            }
            let segments = segments
                .into_iter()
                .map(WireSegment::into_segment)
                .collect::<std::result::Result<Vec<_>, String>>()
                .map_err(schema_err)?;
            CanonicalBody::Segments(segments)
        }
        Task::Mc => {
            if bodies > 1
                || wire.tube.is_some()
                || wire.intervals.is_some()
                || wire.segments.is_some()
            {
                return Err(schema_err(
                    "mc prediction may carry only an \"answer\"".into(),
                ));
            }
            CanonicalBody::Answer(wire.answer)
        }
    };
    Ok(PredictionRecord::Canonical(CanonicalPrediction {
        query_id: wire.query_id,
        task: wire.task,
        body,
    }))
}

/// Replays annotations as canonical predictions (useful for identity runs
/// and fixtures).
pub fn canonical_from_annotations(annotations: &[QueryAnnotation]) -> Vec<CanonicalPrediction> {
    annotations
        .iter()
        .map(|a| {
            let body = match &a.gt {
                GroundTruth::Tube(tube) => CanonicalBody::Tube(tube.clone()),
                GroundTruth::Intervals(set) => CanonicalBody::Intervals(set.clone()),
                GroundTruth::Segments(segments) => CanonicalBody::Segments(segments.clone()),
                GroundTruth::MultipleChoice(mc) => CanonicalBody::Answer(Some(mc.answer)),
            };
            CanonicalPrediction {
                query_id: a.query_id.clone(),
                task: a.task,
                body,
            }
        })
        .collect()
}
