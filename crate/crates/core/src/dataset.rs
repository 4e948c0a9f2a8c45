//! Annotation ingestion, validation, and slice bucketing.
//!
//! Annotation files are JSON Lines; every record carries a schema version,
//! identifiers, video duration, task, query metadata, and a task-specific
//! ground-truth object:
//!
//! ```json
//! {"v":1,"query_id":"q1","video_id":"v1","duration_s":120.0,"task":"stg",
//!  "query":"person in red","modality":"vision","format":"phrase",
//!  "gt":{"tube":{"timestamps":[1,2],"boxes":[[0,0,0.5,0.5],[0,0,0.5,0.5]]}}}
//! ```
//!
//! Slice bucketing assigns each query to reporting cells (video length,
//! tube duration, object size, query format, modality, task type) with
//! half-open boundaries: a value on a boundary falls into the upper bucket.

use crate::error::Error;
use crate::model::{IntervalSet, Tube};
use crate::plot::TranscriptSegment;
use crate::wire::{WireSegment, WireTube};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Current annotation schema version.
pub const SCHEMA_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Vocabulary enums
// ---------------------------------------------------------------------------

/// Benchmark task of a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Stg,
    Tr,
    Char,
    Mc,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Stg => "stg",
            Task::Tr => "tr",
            Task::Char => "char",
            Task::Mc => "mc",
        }
    }

    /// The benchmark family whose bucket tables apply to this task.
    pub fn benchmark(&self) -> Benchmark {
        match self {
            Task::Stg => Benchmark::Stg,
            Task::Tr => Benchmark::Tr,
            Task::Char | Task::Mc => Benchmark::Plot,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stg" => Ok(Task::Stg),
            "tr" => Ok(Task::Tr),
            "char" => Ok(Task::Char),
            "mc" => Ok(Task::Mc),
            other => Err(Error::Config(format!(
                "unknown task {other:?} (expected stg, tr, char, or mc)"
            ))),
        }
    }
}

/// Input modality a query is grounded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "audio")]
    Audio,
    #[serde(rename = "vision")]
    Vision,
    #[serde(rename = "vision+audio")]
    VisionAudio,
}

impl Modality {
    pub fn label(&self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Vision => "vision",
            Modality::VisionAudio => "vision+audio",
        }
    }
}

/// Syntactic form of the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryFormat {
    Keyword,
    Phrase,
    Sentence,
}

impl QueryFormat {
    pub fn label(&self) -> &'static str {
        match self {
            QueryFormat::Keyword => "keyword",
            QueryFormat::Phrase => "phrase",
            QueryFormat::Sentence => "sentence",
        }
    }
}

/// Benchmark family; selects which bucket tables apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Stg,
    Tr,
    Plot,
}

// ---------------------------------------------------------------------------
// Slice keys
// ---------------------------------------------------------------------------

/// Reporting dimension a slice cell belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dimension {
    Overall,
    VideoLength,
    TubeDuration,
    ObjectSize,
    QueryFormat,
    Modality,
    TaskType,
}

impl Dimension {
    pub fn label(&self) -> &'static str {
        match self {
            Dimension::Overall => "Overall",
            Dimension::VideoLength => "Video Length",
            Dimension::TubeDuration => "Tube Duration",
            Dimension::ObjectSize => "Object Size",
            Dimension::QueryFormat => "Query Format",
            Dimension::Modality => "Modality",
            Dimension::TaskType => "Task Type",
        }
    }
}

/// One reporting cell: a dimension plus a bucket label within it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SliceKey {
    pub dimension: Dimension,
    pub bucket: String,
}

impl SliceKey {
    pub fn new(dimension: Dimension, bucket: impl Into<String>) -> Self {
        Self {
            dimension,
            bucket: bucket.into(),
        }
    }

    /// The cell every query belongs to.
    pub fn overall() -> Self {
        Self::new(Dimension::Overall, "overall")
    }
}

// ---------------------------------------------------------------------------
// Bucketing
// ---------------------------------------------------------------------------

/// Video length buckets of each benchmark, in reporting order.
pub fn video_length_buckets(benchmark: Benchmark) -> &'static [&'static str] {
    match benchmark {
        Benchmark::Stg => &["ultra-short", "short", "medium"],
        Benchmark::Tr => &["ultra-short", "short", "medium", "long", "ultra-long"],
        Benchmark::Plot => &["<90s", "90-150s", "150-210s", ">210s"],
    }
}

/// Tube duration buckets in reporting order.
pub const TUBE_DURATION_BUCKETS: [&str; 3] = ["micro-short", "ultra-short", "short"];

/// Object size buckets in reporting order.
pub const OBJECT_SIZE_BUCKETS: [&str; 3] = ["small", "medium", "large"];

/// Query format buckets in reporting order.
pub const QUERY_FORMAT_BUCKETS: [&str; 3] = ["keyword", "phrase", "sentence"];

/// Modality buckets in reporting order.
pub const MODALITY_BUCKETS: [&str; 3] = ["audio", "vision", "vision+audio"];

/// Buckets a video duration. Returns the label and whether the duration
/// fell outside the benchmark's defined range (such durations are clamped
/// into the top bucket and should be surfaced as a warning).
pub fn bucket_video_duration(duration_s: f64, benchmark: Benchmark) -> (&'static str, bool) {
    match benchmark {
        Benchmark::Stg => match duration_s {
            d if d < 60.0 => ("ultra-short", false),
            d if d < 600.0 => ("short", false),
            d if d < 1800.0 => ("medium", false),
            _ => ("medium", true),
        },
        Benchmark::Tr => match duration_s {
            d if d < 60.0 => ("ultra-short", false),
            d if d < 600.0 => ("short", false),
            d if d < 1800.0 => ("medium", false),
            d if d < 3600.0 => ("long", false),
            _ => ("ultra-long", false),
        },
        Benchmark::Plot => match duration_s {
            d if d < 90.0 => ("<90s", false),
            d if d < 150.0 => ("90-150s", false),
            d if d < 210.0 => ("150-210s", false),
            _ => (">210s", false),
        },
    }
}

/// Buckets a ground-truth tube duration (its number of 1 Hz samples).
/// Durations beyond 60 s clamp into `short` with a warning flag.
pub fn bucket_tube_duration(n_gt_samples: usize) -> (&'static str, bool) {
    match n_gt_samples {
        n if n < 3 => ("micro-short", false),
        n if n < 10 => ("ultra-short", false),
        n if n <= 60 => ("short", false),
        _ => ("short", true),
    }
}

/// Buckets a mean normalised box area.
pub fn bucket_object_size(mean_area: f64, benchmark: Benchmark) -> &'static str {
    let (small_lim, medium_lim) = match benchmark {
        Benchmark::Plot => (0.05, 0.20),
        // The same labels apply to both grounding benchmarks.
        Benchmark::Stg | Benchmark::Tr => (0.10, 0.30),
    };
    if mean_area < small_lim {
        "small"
    } else if mean_area < medium_lim {
        "medium"
    } else {
        "large"
    }
}

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

/// Multiple-choice ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McGroundTruth {
    pub options: Vec<String>,
    /// Index of the correct option.
    pub answer: usize,
    /// Optional question category for slicing.
    pub task_type: Option<String>,
}

/// Task-specific ground truth of one query.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Tube(Tube),
    Intervals(IntervalSet),
    Segments(Vec<TranscriptSegment>),
    MultipleChoice(McGroundTruth),
}

/// One fully validated annotation record.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryAnnotation {
    pub query_id: String,
    pub video_id: String,
    pub duration_s: f64,
    pub task: Task,
    pub query: String,
    pub modality: Modality,
    pub format: QueryFormat,
    pub gt: GroundTruth,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireAnnotation {
    v: u32,
    query_id: String,
    video_id: String,
    duration_s: f64,
    task: Task,
    query: String,
    modality: Modality,
    format: QueryFormat,
    gt: serde_json::Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireStgGt {
    tube: WireTube,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireTrGt {
    intervals: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireCharGt {
    segments: Vec<WireSegment>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireMcGt {
    options: Vec<String>,
    answer: usize,
    #[serde(default)]
    task_type: Option<String>,
}

/// Parses and validates one annotation line. `path` and `line` are used
/// only for error messages.
pub fn parse_annotation_line(path: &str, line: usize, text: &str) -> Result<QueryAnnotation> {
    let schema_err = |message: String| Error::Schema {
        path: path.to_string(),
        line,
        message,
    };
    let wire: WireAnnotation = serde_json::from_str(text).map_err(|e| schema_err(e.to_string()))?;
    if wire.v != SCHEMA_VERSION {
        return Err(schema_err(format!(
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            wire.v
        )));
    }
    if wire.query_id.is_empty() {
        return Err(schema_err("query_id must be non-empty".into()));
    }
    if !wire.duration_s.is_finite() || wire.duration_s <= 0.0 {
        return Err(schema_err(format!(
            "duration_s must be a positive number, got {}",
            wire.duration_s
        )));
    }

    let gt_err = |message: String| schema_err(format!("gt: {message}"));
    let gt = match wire.task {
        Task::Stg => {
            let gt: WireStgGt =
                serde_json::from_value(wire.gt).map_err(|e| gt_err(e.to_string()))?;
            let tube = gt.tube.into_tube().map_err(gt_err)?;
            if tube.is_empty() {
                return Err(gt_err("ground-truth tube must be non-empty".into()));
            }
            GroundTruth::Tube(tube)
        }
        Task::Tr => {
            let gt: WireTrGt =
                serde_json::from_value(wire.gt).map_err(|e| gt_err(e.to_string()))?;
            let set = IntervalSet::from_pairs(gt.intervals.iter().map(|[s, e]| (*s, *e)))
                .map_err(|e| gt_err(e.to_string()))?;
            if set.measure() <= 0.0 {
                return Err(gt_err(
                    "ground-truth intervals must have positive total length".into(),
                ));
            }
            GroundTruth::Intervals(set)
        }
        Task::Char => {
            let gt: WireCharGt =
                serde_json::from_value(wire.gt).map_err(|e| gt_err(e.to_string()))?;
            if gt.segments.is_empty() {
                return Err(gt_err(
                    "ground truth must contain at least one segment".into(),
                ));
            }
            let segments = gt
                .segments
                .into_iter()
                .map(WireSegment::into_segment)
                .collect::<std::result::Result<Vec<_>, String>>()
                .map_err(gt_err)?;
            GroundTruth::Segments(segments)
        }
        Task::Mc => {
            let gt: WireMcGt =
                serde_json::from_value(wire.gt).map_err(|e| gt_err(e.to_string()))?;
            if !(2..=5).contains(&gt.options.len()) {
                return Err(gt_err(format!(
                    "expected between 2 and 5 options, got {}",
                    gt.options.len()
                )));
            }
            if gt.answer >= gt.options.len() {
                return Err(gt_err(format!(
                    "answer index {} out of range for {} options",
                    gt.answer,
                    gt.options.len()
                )));
            }
            GroundTruth::MultipleChoice(McGroundTruth {
                options: gt.options,
                answer: gt.answer,
                task_type: gt.task_type,
            })
        }
    };

    Ok(QueryAnnotation {
        query_id: wire.query_id,
        video_id: wire.video_id,
        duration_s: wire.duration_s,
        task: wire.task,
        query: wire.query,
        modality: wire.modality,
        format: wire.format,
        gt,
    })
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let content = std::fs::read_to_string(path).map_err(|reason| Error::Io {
        path: path.display().to_string(),
        reason,
    })?;
    Ok(content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.to_string()))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect())
}

/// Loads an annotation file strictly: the first schema violation or
/// duplicated `query_id` aborts the load.
pub fn load_annotations(path: &Path) -> Result<Vec<QueryAnnotation>> {
    let display = path.display().to_string();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut out = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let annotation = parse_annotation_line(&display, line_no, &line)?;
        if let Some(&first_line) = seen.get(&annotation.query_id) {
            return Err(Error::DuplicateQueryId {
                query_id: annotation.query_id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(annotation.query_id.clone(), line_no);
        out.push(annotation);
    }
    if out.is_empty() {
        return Err(Error::EmptyQuerySet {
            context: "annotation file has no records",
        });
    }
    Ok(out)
}

/// Loads an annotation file leniently: every problem line is reported and
/// skipped instead of aborting. Only I/O failures are hard errors.
pub fn scan_annotations(path: &Path) -> Result<(Vec<QueryAnnotation>, Vec<String>)> {
    let display = path.display().to_string();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut records = Vec::new();
    let mut problems = Vec::new();
    for (line_no, line) in read_lines(path)? {
        match parse_annotation_line(&display, line_no, &line) {
            Ok(annotation) => {
                if let Some(&first_line) = seen.get(&annotation.query_id) {
                    problems.push(
                        Error::DuplicateQueryId {
                            query_id: annotation.query_id,
                            first_line,
                            second_line: line_no,
                        }
                        .to_string(),
                    );
                } else {
                    seen.insert(annotation.query_id.clone(), line_no);
                    records.push(annotation);
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    Ok((records, problems))
}

// ---------------------------------------------------------------------------
// Slicing
// ---------------------------------------------------------------------------

/// Slice cells a query contributes to, in dimension order. The overall
/// cell always comes first.
pub fn slice_keys_for(annotation: &QueryAnnotation) -> Vec<SliceKey> {
    let benchmark = annotation.task.benchmark();
    let mut keys = vec![SliceKey::overall()];
    let (video_bucket, _) = bucket_video_duration(annotation.duration_s, benchmark);
    keys.push(SliceKey::new(Dimension::VideoLength, video_bucket));
    match (&annotation.task, &annotation.gt) {
        (Task::Stg, GroundTruth::Tube(tube)) => {
            let (tube_bucket, _) = bucket_tube_duration(tube.len());
            keys.push(SliceKey::new(Dimension::TubeDuration, tube_bucket));
            if let Some(area) = tube.mean_box_area() {
                keys.push(SliceKey::new(
                    Dimension::ObjectSize,
                    bucket_object_size(area, benchmark),
                ));
            }
        }
        (Task::Tr, _) => {
            keys.push(SliceKey::new(
                Dimension::QueryFormat,
                annotation.format.label(),
            ));
            keys.push(SliceKey::new(
                Dimension::Modality,
                annotation.modality.label(),
            ));
        }
        (Task::Char, _) => {}
        (Task::Mc, GroundTruth::MultipleChoice(mc)) => {
            keys.push(SliceKey::new(
                Dimension::TaskType,
                mc.task_type.as_deref().unwrap_or("unspecified"),
            ));
        }
        _ => {}
    }
    keys
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

/// Result of validating a set of annotations: per-bucket counts plus
/// warnings about suspicious but non-fatal content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub n_records: usize,
    pub task_counts: BTreeMap<String, usize>,
    /// `(task, dimension label, bucket, count)` in deterministic order.
    pub histogram: Vec<(String, String, String, usize)>,
    pub warnings: Vec<String>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "records: {}", self.n_records)?;
        for (task, count) in &self.task_counts {
            writeln!(f, "  task {task}: {count}")?;
        }
        let mut last_heading = None;
        for (task, dimension, bucket, count) in &self.histogram {
            let heading = (task.clone(), dimension.clone());
            if last_heading.as_ref() != Some(&heading) {
                writeln!(f, "{task} / {dimension}:")?;
                last_heading = Some(heading);
            }
            writeln!(f, "  {bucket}: {count}")?;
        }
        if self.warnings.is_empty() {
            writeln!(f, "warnings: none")?;
        } else {
            writeln!(f, "warnings:")?;
            for warning in &self.warnings {
                writeln!(f, "  {warning}")?;
            }
        }
        Ok(())
    }
}

/// Computes bucket histograms and content warnings for loaded annotations.
pub fn validate(annotations: &[QueryAnnotation]) -> ValidationReport {
    let mut task_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut cells: BTreeMap<(String, Dimension, String), usize> = BTreeMap::new();
    let mut warnings = Vec::new();

    for annotation in annotations {
        *task_counts
            .entry(annotation.task.name().into())
            .or_insert(0) += 1;
        for key in slice_keys_for(annotation) {
            *cells
                .entry((annotation.task.name().into(), key.dimension, key.bucket))
                .or_insert(0) += 1;
        }

        let warn = |msg: String, warnings: &mut Vec<String>| {
            warnings.push(format!("{}: {msg}", annotation.query_id));
        };
        let benchmark = annotation.task.benchmark();
        if bucket_video_duration(annotation.duration_s, benchmark).1 {
            warn(
                format!(
                    "video duration {}s exceeds the benchmark's defined range; counted as the top bucket",
                    annotation.duration_s
                ),
                &mut warnings,
            );
        }
        match &annotation.gt {
            GroundTruth::Tube(tube) => {
                if bucket_tube_duration(tube.len()).1 {
                    warn(
                        format!(
                            "tube spans {} samples, beyond the 60 s bucket range; counted as short",
                            tube.len()
                        ),
                        &mut warnings,
                    );
                }
                if let Some(last) = tube.support().timestamps().last() {
                    if f64::from(*last) > annotation.duration_s {
                        warn(
                            format!(
                                "tube timestamp {last}s lies beyond the video duration {}s",
                                annotation.duration_s
                            ),
                            &mut warnings,
                        );
                    }
                }
            }
            GroundTruth::Intervals(set) => {
                if let Some(last) = set.intervals().last() {
                    if last.end() > annotation.duration_s {
                        warn(
                            format!(
                                "interval end {}s lies beyond the video duration {}s",
                                last.end(),
                                annotation.duration_s
                            ),
                            &mut warnings,
                        );
                    }
                }
            }
            GroundTruth::Segments(segments) => {
                for segment in segments {
                    if segment.end_s() > annotation.duration_s {
                        warn(
                            format!(
                                "segment end {}s lies beyond the video duration {}s",
                                segment.end_s(),
                                annotation.duration_s
                            ),
                            &mut warnings,
                        );
                        break;
                    }
                }
            }
            GroundTruth::MultipleChoice(_) => {}
        }
    }

    let histogram = cells
        .into_iter()
        .map(|((task, dimension, bucket), count)| {
            (task, dimension.label().to_string(), bucket, count)
        })
        .collect();

    ValidationReport {
        n_records: annotations.len(),
        task_counts,
        histogram,
        warnings,
    }
}
