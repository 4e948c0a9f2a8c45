//! Evaluation runs and deterministic report rendering.
//!
//! [`evaluate_run`] ties the pipeline together: it loads annotations,
//! normalises a prediction file (raw dialect payloads, canonical records,
//! or a mix), scores every query, aggregates per reporting slice, and
//! returns a [`RunReport`].
//!
//! Reports are byte-identical across input orderings and worker counts:
//! queries are scored in `query_id` order, every aggregation folds over
//! ordered collections, and no timestamps or host details are embedded.
//! Provenance is carried as SHA-256 digests of the two input files.

use crate::adapters::{
    extract_mc_answer, parse_char_segments, parse_prediction_line, parse_time_ranges, parse_tube,
    CanonicalBody, CanonicalPrediction, Dialect, FrameSamplingPolicy, PredictionRecord,
    RawPrediction, WarningKind, WarningSet,
};
use crate::dataset::{
    self, load_annotations, slice_keys_for, Benchmark, Dimension, GroundTruth, QueryAnnotation,
    SliceKey, Task, SCHEMA_VERSION,
};
use crate::error::Error;
use crate::model::{IntervalSet, Tube, TubeBuilder};
use crate::plot::{McItem, PlotQueryStats, WerBreakdown};
use crate::stg::{self, StgRecord};
use crate::tr::{self, IntervalScores, ThresholdCurve};
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

// ---------------------------------------------------------------------------
// Configuration and report data model
// ---------------------------------------------------------------------------

/// Settings for one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Task to evaluate; annotations for other tasks in the same file are
    /// ignored.
    pub task: Task,
    /// Dialect of raw prediction payloads. Optional when every prediction
    /// line is already canonical.
    pub dialect: Option<Dialect>,
    /// Worker threads for scoring; `None` uses the runtime default. Has no
    /// effect on report bytes.
    pub workers: Option<usize>,
}

/// One metric cell in a slice row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    /// `None` renders as `N/A` (metric undefined on this slice).
    pub value: Option<f64>,
}

/// One bucket's aggregated metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceRow {
    pub bucket: String,
    pub n: u64,
    pub metrics: Vec<MetricValue>,
}

/// All buckets of one reporting dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTable {
    pub dimension: String,
    pub rows: Vec<SliceRow>,
}

/// Run counters surfaced alongside the metric tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub queries_total: u64,
    pub queries_with_prediction: u64,
    pub queries_without_prediction: u64,
    pub prediction_records: u64,
    /// Records whose payload could not be turned into a usable value; such
    /// queries score zero and flip the run status to partial.
    pub parse_failures: u64,
    /// Multiple-choice queries answered with no extractable option.
    pub refusals: u64,
    /// Repair warnings by kind.
    pub warnings: BTreeMap<String, u64>,
}

/// Identifies exactly what was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema_version: u32,
    pub task: String,
    pub dialect: Option<String>,
    pub annotations_sha256: String,
    pub predictions_sha256: String,
}

/// Complete result of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub dialect: Option<String>,
    pub tables: Vec<SliceTable>,
    /// Overall threshold curves (temporal-retrieval runs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<ThresholdCurve>>,
    pub diagnostics: Diagnostics,
    pub provenance: Provenance,
}

/// Whether every prediction was usable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalStatus {
    Clean,
    Partial,
}

impl EvalStatus {
    /// Process exit code the CLI maps this status to.
    pub fn exit_code(&self) -> i32 {
        match self {
            EvalStatus::Clean => 0,
            EvalStatus::Partial => 3,
        }
    }
}

// ---------------------------------------------------------------------------
// Normalisation of prediction records
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Clone)]
struct NormStats {
    records: u64,
    parse_failures: u64,
    warnings: WarningSet,
}

fn empty_body(task: Task) -> CanonicalBody {
    match task {
        Task::Stg => CanonicalBody::Tube(Tube::empty()),
        Task::Tr => CanonicalBody::Intervals(IntervalSet::empty()),
        Task::Char => CanonicalBody::Segments(Vec::new()),
        Task::Mc => CanonicalBody::Answer(None),
    }
}

fn gpt_policy(raw: &RawPrediction, annotation: &QueryAnnotation) -> Result<FrameSamplingPolicy> {
    match &raw.context {
        Some(ctx) => FrameSamplingPolicy::from_context(ctx),
        None => FrameSamplingPolicy::for_video(annotation.duration_s),
    }
}

/// Normalises one raw record against its annotation. Parse failures come
/// back as an empty body plus a counted failure; configuration problems
/// propagate as errors.
fn normalize_raw(
    raw: &RawPrediction,
    annotation: &QueryAnnotation,
    dialect: Dialect,
    stats: &mut NormStats,
) -> Result<CanonicalBody> {
    let policy = if dialect == Dialect::Gpt {
        Some(gpt_policy(raw, annotation)?)
    } else {
        None
    };
    match annotation.task {
        Task::Stg => match parse_tube(dialect, &raw.payload, policy.as_ref()) {
            Ok(parsed) => {
                stats.warnings.merge(&parsed.warnings);
                Ok(CanonicalBody::Tube(parsed.value))
            }
            Err(e) if e.is_parse_failure() => {
                stats.parse_failures += 1;
                Ok(empty_body(Task::Stg))
            }
            Err(e) => Err(e),
        },
        Task::Tr => {
            let parsed = parse_time_ranges(dialect, &raw.payload, policy.as_ref())?;
            if parsed.warnings.has(WarningKind::NoParsableRange) {
                stats.parse_failures += 1;
            }
            stats.warnings.merge(&parsed.warnings);
            Ok(CanonicalBody::Intervals(parsed.value))
        }
        Task::Char => match parse_char_segments(&raw.payload) {
            Ok(parsed) => {
                stats.warnings.merge(&parsed.warnings);
                Ok(CanonicalBody::Segments(parsed.value))
            }
            Err(e) if e.is_parse_failure() => {
                stats.parse_failures += 1;
                Ok(empty_body(Task::Char))
            }
            Err(e) => Err(e),
        },
        Task::Mc => {
            let GroundTruth::MultipleChoice(mc) = &annotation.gt else {
                unreachable!("task/gt coherence is enforced at load time");
            };
            Ok(CanonicalBody::Answer(extract_mc_answer(
                &raw.payload,
                &mc.options,
            )))
        }
    }
}

/// Merges a second prediction body for the same query.
fn merge_bodies(
    acc: CanonicalBody,
    next: CanonicalBody,
    warnings: &mut WarningSet,
) -> CanonicalBody {
    match (acc, next) {
        (CanonicalBody::Tube(a), CanonicalBody::Tube(b)) => {
            let mut builder = TubeBuilder::new();
            for (t, bb) in a.iter().chain(b.iter()) {
                builder.insert(t, *bb);
            }
            let (tube, collisions) = builder.build();
            warnings.add_n(WarningKind::DuplicateTimestamp, u64::from(collisions));
            CanonicalBody::Tube(tube)
        }
        (CanonicalBody::Intervals(a), CanonicalBody::Intervals(b)) => {
            let pairs = a.to_pairs().into_iter().chain(b.to_pairs());
            CanonicalBody::Intervals(
                IntervalSet::from_pairs(pairs).expect("normalised pairs are valid"),
            )
        }
        (CanonicalBody::Segments(mut a), CanonicalBody::Segments(b)) => {
            a.extend(b);
            CanonicalBody::Segments(a)
        }
        (CanonicalBody::Answer(a), CanonicalBody::Answer(b)) => {
            let merged = match (a, b) {
                (Some(x), Some(y)) if x != y => {
                    warnings.add(WarningKind::ConflictingAnswers);
                    Some(x.min(y))
                }
                (x, y) => x.or(y),
            };
            CanonicalBody::Answer(merged)
        }
        // Tasks are validated per record before merging.
        _ => unreachable!("merged bodies always share a task"),
    }
}

/// Normalises every record for one query into a single canonical body.
fn normalize_for_query(
    annotation: &QueryAnnotation,
    records: &[PredictionRecord],
    dialect: Option<Dialect>,
) -> Result<(CanonicalBody, NormStats)> {
    let mut stats = NormStats {
        records: records.len() as u64,
        ..NormStats::default()
    };
    let mut body: Option<CanonicalBody> = None;
    for record in records {
        let next = match record {
            PredictionRecord::Raw(raw) => {
                let dialect = dialect.ok_or_else(|| {
                    Error::Config(format!(
                        "prediction for query {:?} is raw model output; a dialect is required",
                        raw.query_id
                    ))
                })?;
                normalize_raw(raw, annotation, dialect, &mut stats)?
            }
            PredictionRecord::Canonical(c) => {
                if c.task != annotation.task {
                    return Err(Error::TaskMismatch {
                        query_id: c.query_id.clone(),
                        expected: annotation.task.name().to_string(),
                        found: c.task.name().to_string(),
                    });
                }
                let mut next = c.body.clone();
                // An answer index that names no option scores incorrect,
                // exactly like a refusal.
                if let (CanonicalBody::Answer(Some(i)), GroundTruth::MultipleChoice(mc)) =
                    (&next, &annotation.gt)
                {
                    if *i >= mc.options.len() {
                        next = CanonicalBody::Answer(None);
                    }
                }
                next
            }
        };
        body = Some(match body.take() {
            None => next,
            Some(acc) => {
                stats.warnings.add(WarningKind::MergedRecords);
                merge_bodies(acc, next, &mut stats.warnings)
            }
        });
    }
    Ok((body.unwrap_or_else(|| empty_body(annotation.task)), stats))
}

// ---------------------------------------------------------------------------
// Per-query scoring
// ---------------------------------------------------------------------------

enum TaskScore {
    Stg(StgRecord),
    Tr(IntervalScores),
    Char(Box<PlotQueryStats>),
    Mc { correct: bool },
}

struct PerQuery {
    slices: Vec<SliceKey>,
    stats: NormStats,
    had_records: bool,
    refusal: bool,
    score: TaskScore,
}

fn score_query(
    annotation: &QueryAnnotation,
    records: &[PredictionRecord],
    dialect: Option<Dialect>,
) -> Result<PerQuery> {
    let (body, stats) = normalize_for_query(annotation, records, dialect)?;
    let slices = slice_keys_for(annotation);
    let had_records = !records.is_empty();
    let mut refusal = false;

    let score = match (&annotation.gt, &body) {
        (GroundTruth::Tube(gt), CanonicalBody::Tube(pred)) => {
            let stats = stg::overlap_stats(pred, gt)?;
            TaskScore::Stg(StgRecord {
                query_id: annotation.query_id.clone(),
                temporal: stg::temporal_scores(&stats)?,
                spatial: stg::spatiotemporal_scores(&stats)?,
                has_prediction: !pred.is_empty(),
                slices: slices.clone(),
            })
        }
        (GroundTruth::Intervals(gt), CanonicalBody::Intervals(pred)) => {
            TaskScore::Tr(tr::interval_scores(pred, gt)?)
        }
        (GroundTruth::Segments(gt), CanonicalBody::Segments(pred)) => {
            TaskScore::Char(Box::new(crate::plot::score_plot_query(gt, pred)))
        }
        (GroundTruth::MultipleChoice(mc), CanonicalBody::Answer(answer)) => {
            refusal = had_records && answer.is_none();
            let item = McItem::new(
                annotation.query_id.clone(),
                mc.options.len(),
                mc.answer,
                *answer,
            )?;
            TaskScore::Mc {
                correct: item.is_correct(),
            }
        }
        _ => unreachable!("normalisation yields a body of the annotation's task"),
    };
    Ok(PerQuery {
        slices,
        stats,
        had_records,
        refusal,
        score,
    })
}

// ---------------------------------------------------------------------------
// Aggregation into slice tables
// ---------------------------------------------------------------------------

/// Reporting dimensions of each task, in table order.
fn dimensions_for(task: Task) -> &'static [Dimension] {
    match task {
        Task::Stg => &[
            Dimension::Overall,
            Dimension::VideoLength,
            Dimension::TubeDuration,
            Dimension::ObjectSize,
        ],
        Task::Tr => &[
            Dimension::Overall,
            Dimension::VideoLength,
            Dimension::QueryFormat,
            Dimension::Modality,
        ],
        Task::Char => &[Dimension::Overall, Dimension::VideoLength],
        Task::Mc => &[
            Dimension::Overall,
            Dimension::TaskType,
            Dimension::VideoLength,
        ],
    }
}

/// Metric column names of each task, in table order.
pub fn metric_names(task: Task) -> &'static [&'static str] {
    match task {
        Task::Stg => &["tIoU", "tP", "tR", "vIoU", "vIoU-Int", "vP", "vR"],
        Task::Tr => &["IoU-AUC", "P-AUC", "R-AUC"],
        Task::Char => &["tIoU", "WER", "sIoU", "Box-Coverage"],
        Task::Mc => &["Accuracy"],
    }
}

/// Fixed bucket vocabulary of a dimension, or `None` when buckets are
/// taken from the data (task types).
fn fixed_buckets(dimension: Dimension, benchmark: Benchmark) -> Option<Vec<&'static str>> {
    match dimension {
        Dimension::Overall => Some(vec!["overall"]),
        Dimension::VideoLength => Some(dataset::video_length_buckets(benchmark).to_vec()),
        Dimension::TubeDuration => Some(dataset::TUBE_DURATION_BUCKETS.to_vec()),
        Dimension::ObjectSize => Some(dataset::OBJECT_SIZE_BUCKETS.to_vec()),
        Dimension::QueryFormat => Some(dataset::QUERY_FORMAT_BUCKETS.to_vec()),
        Dimension::Modality => Some(dataset::MODALITY_BUCKETS.to_vec()),
        Dimension::TaskType => None,
    }
}

/// Builds the slice tables for a task from per-slice row values. Fixed
/// vocabularies always render every bucket (empty ones with `N = 0` and
/// `N/A` metrics); data-driven vocabularies render observed buckets in
/// sorted order.
fn assemble_tables(task: Task, rows: &SliceValues) -> Vec<SliceTable> {
    let names = metric_names(task);
    let benchmark = task.benchmark();
    let mut tables = Vec::new();
    for &dimension in dimensions_for(task) {
        let buckets: Vec<String> = match fixed_buckets(dimension, benchmark) {
            Some(fixed) => fixed.into_iter().map(String::from).collect(),
            None => rows
                .keys()
                .filter(|k| k.dimension == dimension)
                .map(|k| k.bucket.clone())
                .collect(),
        };
        let table_rows = buckets
            .into_iter()
            .map(|bucket| {
                let key = SliceKey::new(dimension, bucket.clone());
                let (n, values) = match rows.get(&key) {
                    Some((n, values)) => (*n, values.clone()),
                    None => (0, vec![None; names.len()]),
                };
                SliceRow {
                    bucket,
                    n,
                    metrics: names
                        .iter()
                        .zip(values)
                        .map(|(&name, value)| MetricValue {
                            name: name.to_string(),
                            value,
                        })
                        .collect(),
                }
            })
            .collect();
        tables.push(SliceTable {
            dimension: dimension.label().to_string(),
            rows: table_rows,
        });
    }
    tables
}

#[derive(Default)]
struct CharSliceAcc {
    n: u64,
    sum_pair_t_iou: f64,
    n_pairs: usize,
    wer: WerBreakdown,
    boxes: crate::plot::BoxMatchStats,
}

/// Per-slice query count and metric means, keyed by slice cell.
type SliceValues = BTreeMap<SliceKey, (u64, Vec<Option<f64>>)>;

/// Folds ordered per-query results into per-slice rows, plus overall
/// threshold curves for temporal retrieval.
fn aggregate(
    task: Task,
    results: &[PerQuery],
) -> Result<(SliceValues, Option<Vec<ThresholdCurve>>)> {
    let mut rows = BTreeMap::new();
    let mut curves = None;
    match task {
        Task::Stg => {
            let records: Vec<StgRecord> = results
                .iter()
                .map(|r| match &r.score {
                    TaskScore::Stg(record) => record.clone(),
                    _ => unreachable!("stg run yields stg scores"),
                })
                .collect();
            for (key, agg) in stg::aggregate_stg(&records) {
                let values = vec![
                    Some(agg.t_iou),
                    agg.t_p,
                    Some(agg.t_r),
                    Some(agg.v_iou),
                    agg.v_iou_int,
                    agg.v_p,
                    Some(agg.v_r),
                ];
                rows.insert(key, (agg.n as u64, values));
            }
        }
        Task::Tr => {
            let mut per_slice: BTreeMap<SliceKey, Vec<IntervalScores>> = BTreeMap::new();
            for result in results {
                let TaskScore::Tr(scores) = &result.score else {
                    unreachable!("tr run yields tr scores");
                };
                for key in &result.slices {
                    per_slice.entry(key.clone()).or_default().push(*scores);
                }
            }
            for (key, scores) in per_slice {
                let summary = tr::summarize(&scores)?;
                if key == SliceKey::overall() {
                    curves = Some(summary.curves.clone());
                }
                rows.insert(
                    key,
                    (
                        scores.len() as u64,
                        vec![
                            Some(summary.iou_auc),
                            Some(summary.precision_auc),
                            Some(summary.recall_auc),
                        ],
                    ),
                );
            }
        }
        Task::Char => {
            let mut per_slice: BTreeMap<SliceKey, CharSliceAcc> = BTreeMap::new();
            for result in results {
                let TaskScore::Char(stats) = &result.score else {
                    unreachable!("char run yields char scores");
                };
                for key in &result.slices {
                    let acc = per_slice.entry(key.clone()).or_default();
                    acc.n += 1;
                    acc.sum_pair_t_iou += stats.matching.total_t_iou;
                    acc.n_pairs += stats.matching.pairs.len();
                    acc.wer.absorb(&stats.wer);
                    acc.boxes.absorb(&stats.boxes);
                }
            }
            for (key, acc) in per_slice {
                let has_pairs = acc.n_pairs > 0;
                let values = vec![
                    has_pairs.then(|| acc.sum_pair_t_iou / acc.n_pairs as f64),
                    has_pairs.then(|| acc.wer.wer()),
                    (acc.boxes.n_pairs > 0).then(|| acc.boxes.mean_iou()),
                    acc.boxes.coverage(),
                ];
                rows.insert(key, (acc.n, values));
            }
        }
        Task::Mc => {
            let mut per_slice: BTreeMap<SliceKey, (u64, u64)> = BTreeMap::new();
            for result in results {
                let TaskScore::Mc { correct } = &result.score else {
                    unreachable!("mc run yields mc scores");
                };
                for key in &result.slices {
                    let entry = per_slice.entry(key.clone()).or_default();
                    entry.0 += 1;
                    entry.1 += u64::from(*correct);
                }
            }
            for (key, (n, correct)) in per_slice {
                rows.insert(key, (n, vec![Some(correct as f64 / n as f64)]));
            }
        }
    }
    Ok((rows, curves))
}

// ---------------------------------------------------------------------------
// The run itself
// ---------------------------------------------------------------------------

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|reason| Error::Io {
        path: path.display().to_string(),
        reason,
    })
}

/// Parses a prediction file into per-query record lists, preserving the
/// file's line order within each query.
fn load_predictions(path: &Path, content: &str) -> Result<BTreeMap<String, Vec<PredictionRecord>>> {
    let path_str = path.display().to_string();
    let mut by_query: BTreeMap<String, Vec<PredictionRecord>> = BTreeMap::new();
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_prediction_line(&path_str, idx + 1, line)?;
        by_query
            .entry(record.query_id().to_string())
            .or_default()
            .push(record);
    }
    Ok(by_query)
}

/// Evaluates a prediction file against an annotation file.
///
/// The returned status is [`EvalStatus::Partial`] when at least one
/// prediction payload was unusable (those queries score zero); input and
/// configuration problems are errors instead.
pub fn evaluate_run(
    annotations_path: &Path,
    predictions_path: &Path,
    config: &EvalConfig,
) -> Result<(RunReport, EvalStatus)> {
    if config.workers == Some(0) {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let annotations_text = read_file(annotations_path)?;
    let predictions_text = read_file(predictions_path)?;
    let annotations_sha256 = sha256_hex(annotations_text.as_bytes());
    let predictions_sha256 = sha256_hex(predictions_text.as_bytes());

    let all_annotations = load_annotations(annotations_path)?;
    let mut selected: Vec<&QueryAnnotation> = all_annotations
        .iter()
        .filter(|a| a.task == config.task)
        .collect();
    selected.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    if selected.is_empty() {
        return Err(Error::EmptyQuerySet {
            context: "no annotations match the evaluated task",
        });
    }

    let predictions = load_predictions(predictions_path, &predictions_text)?;

    // Every prediction must reference an annotation of the evaluated task.
    let task_by_id: BTreeMap<&str, Task> = all_annotations
        .iter()
        .map(|a| (a.query_id.as_str(), a.task))
        .collect();
    let mut unknown = Vec::new();
    for query_id in predictions.keys() {
        match task_by_id.get(query_id.as_str()) {
            None => unknown.push(query_id.clone()),
            Some(task) if *task != config.task => {
                return Err(Error::TaskMismatch {
                    query_id: query_id.clone(),
                    expected: config.task.name().to_string(),
                    found: task.name().to_string(),
                });
            }
            Some(_) => {}
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownQueryIds { ids: unknown });
    }

    // Score queries in id order; the parallel map preserves that order, so
    // worker count cannot influence any downstream fold.
    let empty: Vec<PredictionRecord> = Vec::new();
    let work: Vec<(&QueryAnnotation, &[PredictionRecord])> = selected
        .iter()
        .map(|a| {
            let records = predictions
                .get(&a.query_id)
                .map_or(empty.as_slice(), Vec::as_slice);
            (*a, records)
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))?;
    let results: Vec<PerQuery> = pool.install(|| {
        work.par_iter()
            .map(|(annotation, records)| score_query(annotation, records, config.dialect))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut diagnostics = Diagnostics {
        queries_total: results.len() as u64,
        ..Diagnostics::default()
    };
    for result in &results {
        if result.had_records {
            diagnostics.queries_with_prediction += 1;
        } else {
            diagnostics.queries_without_prediction += 1;
        }
        diagnostics.prediction_records += result.stats.records;
        diagnostics.parse_failures += result.stats.parse_failures;
        diagnostics.refusals += u64::from(result.refusal);
        for (kind, count) in result.stats.warnings.iter() {
            *diagnostics
                .warnings
                .entry(kind.label().to_string())
                .or_insert(0) += count;
        }
    }

    let (rows, curves) = aggregate(config.task, &results)?;
    let report = RunReport {
        task: config.task.name().to_string(),
        dialect: config.dialect.map(|d| d.name().to_string()),
        tables: assemble_tables(config.task, &rows),
        curves,
        diagnostics,
        provenance: Provenance {
            schema_version: SCHEMA_VERSION,
            task: config.task.name().to_string(),
            dialect: config.dialect.map(|d| d.name().to_string()),
            annotations_sha256,
            predictions_sha256,
        },
    };
    let status = if report.diagnostics.parse_failures > 0 {
        EvalStatus::Partial
    } else {
        EvalStatus::Clean
    };
    Ok((report, status))
}

// ---------------------------------------------------------------------------
// Normalisation runs (the `normalize` subcommand)
// ---------------------------------------------------------------------------

/// Result of normalising a raw prediction file to canonical lines.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizeOutcome {
    /// Canonical JSON lines, one per input record, in input order.
    pub lines: Vec<String>,
    pub records: u64,
    /// Records that produced an empty canonical value because their payload
    /// was unusable.
    pub parse_failures: u64,
    pub warnings: WarningSet,
}

/// Converts a prediction file to canonical form without scoring it.
///
/// Annotations are optional but required to resolve `gpt` frame sampling
/// for records without an inline context, and to resolve multiple-choice
/// option lists. Canonical input lines pass through unchanged (after task
/// validation), so normalisation is idempotent.
pub fn normalize_run(
    predictions_path: &Path,
    task: Task,
    dialect: Dialect,
    annotations: Option<&[QueryAnnotation]>,
) -> Result<NormalizeOutcome> {
    let content = read_file(predictions_path)?;
    let path_str = predictions_path.display().to_string();
    let by_id: BTreeMap<&str, &QueryAnnotation> = annotations
        .unwrap_or(&[])
        .iter()
        .map(|a| (a.query_id.as_str(), a))
        .collect();

    let mut outcome = NormalizeOutcome {
        lines: Vec::new(),
        records: 0,
        parse_failures: 0,
        warnings: WarningSet::new(),
    };
    for (idx, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        outcome.records += 1;
        let record = parse_prediction_line(&path_str, idx + 1, line)?;
        let canonical = match record {
            PredictionRecord::Canonical(c) => {
                if c.task != task {
                    return Err(Error::TaskMismatch {
                        query_id: c.query_id.clone(),
                        expected: task.name().to_string(),
                        found: c.task.name().to_string(),
                    });
                }
                c
            }
            PredictionRecord::Raw(raw) => {
                let annotation = by_id.get(raw.query_id.as_str()).copied();
                // Only tube and range parsing consume the frame policy, so
                // other tasks must not trip over a missing one.
                let needs_policy = dialect == Dialect::Gpt && matches!(task, Task::Stg | Task::Tr);
                let policy = match (needs_policy, &raw.context, annotation) {
                    (false, _, _) => None,
                    (true, Some(ctx), _) => Some(FrameSamplingPolicy::from_context(ctx)?),
                    (true, None, Some(a)) => Some(FrameSamplingPolicy::for_video(a.duration_s)?),
                    (true, None, None) => {
                        return Err(Error::Config(format!(
                            "gpt record for query {:?} has no sampling context; \
                             pass annotations to derive one",
                            raw.query_id
                        )))
                    }
                };
                let body = match task {
                    Task::Stg => match parse_tube(dialect, &raw.payload, policy.as_ref()) {
                        Ok(parsed) => {
                            outcome.warnings.merge(&parsed.warnings);
                            CanonicalBody::Tube(parsed.value)
                        }
                        Err(e) if e.is_parse_failure() => {
                            outcome.parse_failures += 1;
                            empty_body(task)
                        }
                        Err(e) => return Err(e),
                    },
                    Task::Tr => {
                        let parsed = parse_time_ranges(dialect, &raw.payload, policy.as_ref())?;
                        if parsed.warnings.has(WarningKind::NoParsableRange) {
                            outcome.parse_failures += 1;
                        }
                        outcome.warnings.merge(&parsed.warnings);
                        CanonicalBody::Intervals(parsed.value)
                    }
                    Task::Char => match parse_char_segments(&raw.payload) {
                        Ok(parsed) => {
                            outcome.warnings.merge(&parsed.warnings);
                            CanonicalBody::Segments(parsed.value)
                        }
                        Err(e) if e.is_parse_failure() => {
                            outcome.parse_failures += 1;
                            empty_body(task)
                        }
                        Err(e) => return Err(e),
                    },
                    Task::Mc => {
                        let Some(annotation) = annotation else {
                            return Err(Error::Config(format!(
                                "mc record for query {:?} needs annotations to \
                                 resolve its option list",
                                raw.query_id
                            )));
                        };
                        let GroundTruth::MultipleChoice(mc) = &annotation.gt else {
                            return Err(Error::TaskMismatch {
                                query_id: raw.query_id.clone(),
                                expected: task.name().to_string(),
                                found: annotation.task.name().to_string(),
                            });
                        };
                        CanonicalBody::Answer(extract_mc_answer(&raw.payload, &mc.options))
                    }
                };
                CanonicalPrediction {
                    query_id: raw.query_id,
                    task,
                    body,
                }
            }
        };
        outcome.lines.push(canonical.to_json_line());
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

/// Formats a metric value for tables: scaled to percent with two decimals,
/// `N/A` when undefined.
fn fmt_metric(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "N/A".to_string(),
    }
}

/// Renders the report as JSON with full numeric precision.
pub fn render_json(report: &RunReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serialises");
    out.push('\n');
    out
}

/// Renders the report as Markdown tables (values in percent).
pub fn render_markdown(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str("# vgeval report\n\n");
    out.push_str(&format!("- task: {}\n", report.task));
    out.push_str(&format!(
        "- dialect: {}\n",
        report.dialect.as_deref().unwrap_or("(canonical)")
    ));
    out.push_str(&format!(
        "- schema version: {}\n",
        report.provenance.schema_version
    ));
    out.push_str(&format!(
        "- annotations sha256: `{}`\n",
        report.provenance.annotations_sha256
    ));
    out.push_str(&format!(
        "- predictions sha256: `{}`\n",
        report.provenance.predictions_sha256
    ));

    for table in &report.tables {
        out.push_str(&format!("\n## {}\n\n", table.dimension));
        let names: Vec<&str> = table
            .rows
            .first()
            .map(|row| row.metrics.iter().map(|m| m.name.as_str()).collect())
            .unwrap_or_default();
        out.push_str(&format!("| Bucket | N | {} |\n", names.join(" | ")));
        out.push_str(&format!("|---|---:|{}\n", "---:|".repeat(names.len())));
        for row in &table.rows {
            let cells: Vec<String> = row.metrics.iter().map(|m| fmt_metric(m.value)).collect();
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                row.bucket,
                row.n,
                cells.join(" | ")
            ));
        }
    }

    out.push_str("\n## Diagnostics\n\n");
    out.push_str("| Counter | Value |\n|---|---:|\n");
    let d = &report.diagnostics;
    out.push_str(&format!("| queries_total | {} |\n", d.queries_total));
    out.push_str(&format!(
        "| queries_with_prediction | {} |\n",
        d.queries_with_prediction
    ));
    out.push_str(&format!(
        "| queries_without_prediction | {} |\n",
        d.queries_without_prediction
    ));
    out.push_str(&format!(
        "| prediction_records | {} |\n",
        d.prediction_records
    ));
    out.push_str(&format!("| parse_failures | {} |\n", d.parse_failures));
    out.push_str(&format!("| refusals | {} |\n", d.refusals));
    for (kind, count) in &d.warnings {
        out.push_str(&format!("| warning: {kind} | {count} |\n"));
    }
    out
}

/// Renders the slice tables as CSV (same percent scaling as Markdown).
pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("dimension,bucket,n,metric,value\n");
    for table in &report.tables {
        for row in &table.rows {
            for metric in &row.metrics {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    table.dimension,
                    row.bucket,
                    row.n,
                    metric.name,
                    fmt_metric(metric.value)
                ));
            }
        }
    }
    out
}

/// Renders threshold curves as CSV (see [`tr::curves_to_csv`]).
pub fn render_curves_csv(curves: &[ThresholdCurve]) -> String {
    tr::curves_to_csv(curves)
}

/// Renders threshold curves as a standalone SVG line chart.
pub fn render_curves_svg(curves: &[ThresholdCurve]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 620.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 400.0;
    let x = |t: f64| LEFT + t * (RIGHT - LEFT);
    let y = |a: f64| BOTTOM - a * (BOTTOM - TOP);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    out.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    ));
    // Grid and axis labels at 0, 0.25, .., 1.
    for k in 0..=4 {
        let v = f64::from(k) / 4.0;
        out.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#dddddd\"/>\n",
            x(0.0),
            y(v),
            x(1.0),
            y(v)
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{:.2}</text>\n",
            x(0.0) - 6.0,
            y(v) + 4.0,
            v
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{:.2}</text>\n",
            x(v),
            BOTTOM + 18.0,
            v
        ));
    }
    out.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x(0.0),
        y(0.0),
        x(1.0),
        y(0.0)
    ));
    out.push_str(&format!(
        "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        x(0.0),
        y(0.0),
        x(0.0),
        y(1.0)
    ));
    out.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">threshold</text>\n",
        x(0.5),
        BOTTOM + 36.0
    ));

    let color = |metric: tr::MetricKind| match metric {
        tr::MetricKind::Iou => "#1f77b4",
        tr::MetricKind::Precision => "#d62728",
        tr::MetricKind::Recall => "#2ca02c",
    };
    for (i, curve) in curves.iter().enumerate() {
        let points: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.1},{:.1}", x(p.threshold), y(p.accuracy)))
            .collect();
        out.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n",
            color(curve.metric),
            points.join(" ")
        ));
        let ly = TOP + 16.0 * i as f64;
        out.push_str(&format!(
            "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
            RIGHT - 120.0,
            ly,
            RIGHT - 96.0,
            ly,
            color(curve.metric)
        ));
        out.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            RIGHT - 90.0,
            ly + 4.0,
            curve.metric.label()
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    fn stg_annotation(query_id: &str, duration: f64, t0: u32) -> String {
        format!(
            r#"{{"v":1,"query_id":"{query_id}","video_id":"v-{query_id}","duration_s":{duration},"task":"stg","query":"the red car","modality":"vision","format":"phrase","gt":{{"tube":{{"timestamps":[{t0},{t1}],"boxes":[[0.2,0.2,0.4,0.4],[0.2,0.2,0.4,0.4]]}}}}}}"#,
            t1 = t0 + 1
        )
    }

    fn config(task: Task, dialect: Option<Dialect>) -> EvalConfig {
        EvalConfig {
            task,
            dialect,
            workers: Some(2),
        }
    }

    #[test]
    fn identity_stg_run_scores_perfectly() {
        let dir = tempfile::tempdir().unwrap();
        let annotations = format!(
            "{}\n{}\n",
            stg_annotation("q-a", 30.0, 5),
            stg_annotation("q-b", 700.0, 10)
        );
        let anno_path = write_file(&dir, "anno.jsonl", &annotations);
        // Identity predictions in canonical form.
        let preds = [
            r#"{"query_id":"q-a","task":"stg","tube":{"timestamps":[5,6],"boxes":[[0.2,0.2,0.4,0.4],[0.2,0.2,0.4,0.4]]}}"#,
            r#"{"query_id":"q-b","task":"stg","tube":{"timestamps":[10,11],"boxes":[[0.2,0.2,0.4,0.4],[0.2,0.2,0.4,0.4]]}}"#,
        ]
        .join("\n");
        let pred_path = write_file(&dir, "preds.jsonl", &preds);

        let (report, status) =
            evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap();
        assert_eq!(status, EvalStatus::Clean);
        assert_eq!(report.diagnostics.queries_total, 2);
        assert_eq!(report.diagnostics.parse_failures, 0);

        let overall = &report.tables[0];
        assert_eq!(overall.dimension, "Overall");
        let row = &overall.rows[0];
        assert_eq!(row.n, 2);
        for metric in &row.metrics {
            assert_eq!(metric.value, Some(1.0), "{}", metric.name);
        }
        // Fixed vocabularies keep empty buckets visible.
        let video_length = &report.tables[1];
        assert_eq!(video_length.rows.len(), 3);
        assert_eq!(video_length.rows[0].bucket, "ultra-short");
        assert_eq!(video_length.rows[0].n, 1);
        assert_eq!(video_length.rows[2].bucket, "medium");
        assert_eq!(video_length.rows[2].n, 1);
        assert_eq!(video_length.rows[1].bucket, "short");
        assert_eq!(video_length.rows[1].n, 0);
        assert_eq!(video_length.rows[1].metrics[0].value, None);
    }

    #[test]
    fn missing_predictions_zero_recall_and_drop_precision() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", stg_annotation("q-a", 30.0, 5)),
        );
        let pred_path = write_file(&dir, "preds.jsonl", "");
        let (report, status) =
            evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap();
        assert_eq!(status, EvalStatus::Clean);
        assert_eq!(report.diagnostics.queries_without_prediction, 1);
        let row = &report.tables[0].rows[0];
        let by_name: BTreeMap<&str, Option<f64>> = row
            .metrics
            .iter()
            .map(|m| (m.name.as_str(), m.value))
            .collect();
        assert_eq!(by_name["tR"], Some(0.0));
        assert_eq!(by_name["tIoU"], Some(0.0));
        assert_eq!(by_name["vR"], Some(0.0));
        assert_eq!(by_name["tP"], None);
        assert_eq!(by_name["vP"], None);
        assert_eq!(by_name["vIoU-Int"], None);
    }

    #[test]
    fn raw_predictions_need_a_dialect() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", stg_annotation("q-a", 30.0, 5)),
        );
        let pred_path = write_file(&dir, "preds.jsonl", r#"{"query_id":"q-a","payload":"[]"}"#);
        let err = evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn parse_failures_flip_status_to_partial() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", stg_annotation("q-a", 30.0, 5)),
        );
        let pred_path = write_file(
            &dir,
            "preds.jsonl",
            r#"{"query_id":"q-a","payload":"I could not find the object."}"#,
        );
        let (report, status) = evaluate_run(
            &anno_path,
            &pred_path,
            &config(Task::Stg, Some(Dialect::Gemini)),
        )
        .unwrap();
        assert_eq!(status, EvalStatus::Partial);
        assert_eq!(status.exit_code(), 3);
        assert_eq!(report.diagnostics.parse_failures, 1);
        // The failed query scores zero recall, like an empty prediction.
        let row = &report.tables[0].rows[0];
        assert_eq!(row.metrics[0].value, Some(0.0));
    }

    #[test]
    fn unknown_and_mismatched_predictions_are_input_errors() {
        let dir = tempfile::tempdir().unwrap();
        let anno = format!(
            "{}\n{}\n",
            stg_annotation("q-a", 30.0, 5),
            r#"{"v":1,"query_id":"q-tr","video_id":"v2","duration_s":60,"task":"tr","query":"q","modality":"vision","format":"phrase","gt":{"intervals":[[0,10]]}}"#
        );
        let anno_path = write_file(&dir, "anno.jsonl", &anno);

        let pred_path = write_file(
            &dir,
            "unknown.jsonl",
            r#"{"query_id":"nope","task":"stg","tube":{"timestamps":[],"boxes":[]}}"#,
        );
        let err = evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap_err();
        assert!(matches!(err, Error::UnknownQueryIds { .. }));

        let pred_path = write_file(
            &dir,
            "mismatch.jsonl",
            r#"{"query_id":"q-tr","task":"tr","intervals":[[0.0,10.0]]}"#,
        );
        let err = evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap_err();
        assert!(matches!(err, Error::TaskMismatch { .. }));
    }

    #[test]
    fn duplicate_records_merge_with_warnings() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", stg_annotation("q-a", 30.0, 5)),
        );
        let preds = [
            r#"{"query_id":"q-a","task":"stg","tube":{"timestamps":[5],"boxes":[[0.2,0.2,0.4,0.4]]}}"#,
            r#"{"query_id":"q-a","task":"stg","tube":{"timestamps":[6],"boxes":[[0.2,0.2,0.4,0.4]]}}"#,
        ]
        .join("\n");
        let pred_path = write_file(&dir, "preds.jsonl", &preds);
        let (report, _) = evaluate_run(&anno_path, &pred_path, &config(Task::Stg, None)).unwrap();
        assert_eq!(report.diagnostics.prediction_records, 2);
        assert_eq!(report.diagnostics.warnings["merged_records"], 1);
        // Merged tube covers the whole ground truth.
        assert_eq!(report.tables[0].rows[0].metrics[0].value, Some(1.0));
    }

    fn tr_annotation(query_id: &str, duration: f64, modality: &str, format: &str) -> String {
        format!(
            r#"{{"v":1,"query_id":"{query_id}","video_id":"v-{query_id}","duration_s":{duration},"task":"tr","query":"someone speaks","modality":"{modality}","format":"{format}","gt":{{"intervals":[[10.0,20.0]]}}}}"#
        )
    }

    #[test]
    fn tr_run_reports_curves_and_auc() {
        let dir = tempfile::tempdir().unwrap();
        let anno = format!(
            "{}\n{}\n",
            tr_annotation("q-a", 120.0, "vision", "phrase"),
            tr_annotation("q-b", 120.0, "audio", "keyword"),
        );
        let anno_path = write_file(&dir, "anno.jsonl", &anno);
        let preds = [
            r#"{"query_id":"q-a","task":"tr","intervals":[[10.0,20.0]]}"#,
            r#"{"query_id":"q-b","task":"tr","intervals":[[10.0,20.0]]}"#,
        ]
        .join("\n");
        let pred_path = write_file(&dir, "preds.jsonl", &preds);
        let (report, status) =
            evaluate_run(&anno_path, &pred_path, &config(Task::Tr, None)).unwrap();
        assert_eq!(status, EvalStatus::Clean);
        let curves = report.curves.as_ref().unwrap();
        assert_eq!(curves.len(), 3);
        assert_eq!(curves[0].points.len(), 101);
        // Perfect predictions give AUC exactly 1 on every metric.
        for metric in &report.tables[0].rows[0].metrics {
            assert_eq!(metric.value, Some(1.0));
        }
        // Modality buckets split the two queries.
        let modality = report
            .tables
            .iter()
            .find(|t| t.dimension == "Modality")
            .unwrap();
        assert_eq!(modality.rows[0].bucket, "audio");
        assert_eq!(modality.rows[0].n, 1);
        assert_eq!(modality.rows[1].bucket, "vision");
        assert_eq!(modality.rows[1].n, 1);
        assert_eq!(modality.rows[2].bucket, "vision+audio");
        assert_eq!(modality.rows[2].n, 0);
    }

    fn mc_annotation(query_id: &str, answer: usize, task_type: Option<&str>) -> String {
        let task_type = task_type
            .map(|t| format!(r#","task_type":"{t}""#))
            .unwrap_or_default();
        format!(
            r#"{{"v":1,"query_id":"{query_id}","video_id":"v-{query_id}","duration_s":100,"task":"mc","query":"what happened?","modality":"vision+audio","format":"sentence","gt":{{"options":["a swim","a hike","a race"],"answer":{answer}{task_type}}}}}"#
        )
    }

    #[test]
    fn mc_run_extracts_and_slices_by_task_type() {
        let dir = tempfile::tempdir().unwrap();
        let anno = format!(
            "{}\n{}\n{}\n",
            mc_annotation("q-a", 1, Some("causal")),
            mc_annotation("q-b", 2, Some("causal")),
            mc_annotation("q-c", 0, None),
        );
        let anno_path = write_file(&dir, "anno.jsonl", &anno);
        let preds = [
            r#"{"query_id":"q-a","payload":"B. a hike"}"#,
            r#"{"query_id":"q-b","payload":"I do not know."}"#,
            r#"{"query_id":"q-c","payload":"a swim"}"#,
        ]
        .join("\n");
        let pred_path = write_file(&dir, "preds.jsonl", &preds);
        let (report, status) = evaluate_run(
            &anno_path,
            &pred_path,
            &config(Task::Mc, Some(Dialect::Qwen)),
        )
        .unwrap();
        assert_eq!(status, EvalStatus::Clean);
        assert_eq!(report.diagnostics.refusals, 1);
        let overall = &report.tables[0].rows[0];
        assert_eq!(overall.n, 3);
        let acc = overall.metrics[0].value.unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-12);
        let task_type = &report.tables[1];
        assert_eq!(task_type.dimension, "Task Type");
        assert_eq!(task_type.rows.len(), 2);
        assert_eq!(task_type.rows[0].bucket, "causal");
        assert_eq!(task_type.rows[0].n, 2);
        assert_eq!(task_type.rows[0].metrics[0].value, Some(0.5));
        assert_eq!(task_type.rows[1].bucket, "unspecified");
    }

    fn char_annotation(query_id: &str) -> String {
        format!(
            r#"{{"v":1,"query_id":"{query_id}","video_id":"v-{query_id}","duration_s":100,"task":"char","query":"the narrator","modality":"vision+audio","format":"sentence","gt":{{"segments":[{{"text":"hello there","start":1.0,"end":3.0,"boxes":[{{"timestamp":1.5,"box_2d":[0.1,0.1,0.3,0.3]}}]}}]}}}}"#
        )
    }

    #[test]
    fn char_identity_run_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(&dir, "anno.jsonl", &format!("{}\n", char_annotation("q-a")));
        let preds = r#"{"query_id":"q-a","task":"char","segments":[{"text":"hello there","start":1.0,"end":3.0,"boxes":[{"timestamp":1.5,"box_2d":[0.1,0.1,0.3,0.3]}]}]}"#;
        let pred_path = write_file(&dir, "preds.jsonl", preds);
        let (report, status) =
            evaluate_run(&anno_path, &pred_path, &config(Task::Char, None)).unwrap();
        assert_eq!(status, EvalStatus::Clean);
        let row = &report.tables[0].rows[0];
        let by_name: BTreeMap<&str, Option<f64>> = row
            .metrics
            .iter()
            .map(|m| (m.name.as_str(), m.value))
            .collect();
        assert_eq!(by_name["tIoU"], Some(1.0));
        assert_eq!(by_name["WER"], Some(0.0));
        assert_eq!(by_name["sIoU"], Some(1.0));
        assert_eq!(by_name["Box-Coverage"], Some(1.0));
    }

    #[test]
    fn reports_are_independent_of_input_order_and_workers() {
        let dir = tempfile::tempdir().unwrap();
        let mut annos: Vec<String> = (0..6)
            .map(|i| stg_annotation(&format!("q-{i}"), 30.0 + 100.0 * i as f64, i))
            .collect();
        let mut preds: Vec<String> = (0..6)
            .map(|i| {
                format!(
                    r#"{{"query_id":"q-{i}","payload":"[{{\"timestamp\":\"00:0{i}\",\"box_2d\":[200,200,400,400]}}]"}}"#
                )
            })
            .collect();

        let anno_path = write_file(&dir, "anno1.jsonl", &(annos.join("\n") + "\n"));
        let pred_path = write_file(&dir, "pred1.jsonl", &(preds.join("\n") + "\n"));
        let mut cfg = config(Task::Stg, Some(Dialect::Gemini));
        cfg.workers = Some(1);
        let (r1, _) = evaluate_run(&anno_path, &pred_path, &cfg).unwrap();
        let md1 = render_markdown(&r1);

        annos.reverse();
        preds.reverse();
        let anno_path = write_file(&dir, "anno2.jsonl", &(annos.join("\n") + "\n"));
        let pred_path = write_file(&dir, "pred2.jsonl", &(preds.join("\n") + "\n"));
        cfg.workers = Some(4);
        let (r2, _) = evaluate_run(&anno_path, &pred_path, &cfg).unwrap();
        let md2 = render_markdown(&r2);

        // Only provenance hashes may differ (the files' bytes moved).
        assert_eq!(r1.tables, r2.tables);
        assert_eq!(r1.diagnostics, r2.diagnostics);
        assert_eq!(
            md1.lines()
                .filter(|l| !l.contains("sha256"))
                .collect::<Vec<_>>(),
            md2.lines()
                .filter(|l| !l.contains("sha256"))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn report_json_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", tr_annotation("q-a", 120.0, "vision", "phrase")),
        );
        let pred_path = write_file(
            &dir,
            "preds.jsonl",
            r#"{"query_id":"q-a","task":"tr","intervals":[[12.0,18.0]]}"#,
        );
        let (report, _) = evaluate_run(&anno_path, &pred_path, &config(Task::Tr, None)).unwrap();
        let json = render_json(&report);
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn normalize_run_is_idempotent_and_counts_failures() {
        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", stg_annotation("q-a", 30.0, 5)),
        );
        let annotations = load_annotations(&anno_path).unwrap();
        let raw = [
            r#"{"query_id":"q-a","payload":"[{\"timestamp\":\"00:05\",\"box_2d\":[200,200,400,400]}]"}"#,
            r#"{"query_id":"q-b","payload":"no boxes, sorry"}"#,
        ]
        .join("\n");
        let raw_path = write_file(&dir, "raw.jsonl", &raw);
        let outcome =
            normalize_run(&raw_path, Task::Stg, Dialect::Gemini, Some(&annotations)).unwrap();
        assert_eq!(outcome.records, 2);
        assert_eq!(outcome.parse_failures, 1);
        assert_eq!(outcome.lines.len(), 2);
        assert!(outcome.lines[0].contains("\"tube\""));

        // Normalising the canonical output changes nothing.
        let canon_path = write_file(&dir, "canon.jsonl", &(outcome.lines.join("\n") + "\n"));
        let again = normalize_run(&canon_path, Task::Stg, Dialect::Gemini, None).unwrap();
        assert_eq!(again.lines, outcome.lines);
        assert_eq!(again.parse_failures, 0);
    }

    #[test]
    fn normalize_mc_without_annotations_asks_for_the_option_list() {
        let dir = tempfile::tempdir().unwrap();
        let raw_path = write_file(
            &dir,
            "raw.jsonl",
            r#"{"query_id":"q-a","payload":"B. the second one"}"#,
        );
        // Even for the gpt dialect, answer extraction has no use for a frame
        // sampling policy; the missing piece is the option list.
        let err = normalize_run(&raw_path, Task::Mc, Dialect::Gpt, None).unwrap_err();
        assert!(err.to_string().contains("option list"), "{err}");
    }

    #[test]
    fn rendering_formats_values_and_na() {
        assert_eq!(fmt_metric(Some(0.43214)), "43.21");
        assert_eq!(fmt_metric(Some(1.0)), "100.00");
        assert_eq!(fmt_metric(None), "N/A");

        let dir = tempfile::tempdir().unwrap();
        let anno_path = write_file(
            &dir,
            "anno.jsonl",
            &format!("{}\n", tr_annotation("q-a", 120.0, "vision", "phrase")),
        );
        let pred_path = write_file(
            &dir,
            "preds.jsonl",
            r#"{"query_id":"q-a","task":"tr","intervals":[[10.0,20.0]]}"#,
        );
        let (report, _) = evaluate_run(&anno_path, &pred_path, &config(Task::Tr, None)).unwrap();
        let md = render_markdown(&report);
        assert!(md.contains("# vgeval report"));
        assert!(md.contains("| overall | 1 | 100.00 | 100.00 | 100.00 |"));
        assert!(md.contains("## Modality"));
        assert!(md.contains("N/A"));

        let csv = render_csv(&report);
        assert!(csv.starts_with("dimension,bucket,n,metric,value\n"));
        assert!(csv.contains("Overall,overall,1,IoU-AUC,100.00"));
        assert!(csv.contains("Modality,audio,0,IoU-AUC,N/A"));

        let curves_csv = render_curves_csv(report.curves.as_ref().unwrap());
        assert_eq!(curves_csv.lines().count(), 1 + 3 * 101);

        let svg = render_curves_svg(report.curves.as_ref().unwrap());
        assert!(svg.starts_with("<svg "));
        assert!(svg.contains("polyline"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.ends_with("</svg>\n"));
    }
}
