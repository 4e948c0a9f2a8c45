//! Spatio-temporal grounding metrics over box tubes.
//!
//! A predicted tube is compared against a ground-truth tube sampled at the
//! same rate. Temporal scores measure how well the predicted support covers
//! the ground-truth support; volumetric scores additionally weight each
//! shared timestamp by the box overlap at that timestamp.
//!
//! With `T_pred` and `T_gt` the two supports, `T_inter` and `T_union` their
//! intersection and union, and `S` the sum of per-frame box IoU over
//! `T_inter`:
//!
//! * `tP = |T_inter| / |T_pred|`, `tR = |T_inter| / |T_gt|`,
//!   `tIoU = |T_inter| / |T_union|`
//! * `vP = S / |T_pred|`, `vR = S / |T_gt|`, `vIoU = S / |T_union|`
//! * `vIoU-Int = S / |T_inter|`, undefined when the supports are disjoint.

use crate::dataset::SliceKey;
use crate::error::Error;
use crate::model::Tube;
use crate::Result;
use std::collections::BTreeMap;

/// Counting statistics shared by all six scores of one tube pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubeOverlapStats {
    /// Sum of per-frame box IoU over the support intersection, accumulated
    /// in ascending timestamp order.
    pub s_sum: f64,
    /// `|T_pred ∩ T_gt|`.
    pub n_inter: usize,
    /// `|T_pred ∪ T_gt|`.
    pub n_union: usize,
    /// `|T_pred|`.
    pub n_pred: usize,
    /// `|T_gt|`.
    pub n_gt: usize,
}

/// Support-level precision, recall, and IoU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalScores {
    pub t_p: f64,
    pub t_r: f64,
    pub t_iou: f64,
}

/// Box-overlap-weighted precision, recall, and IoU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatioTemporalScores {
    pub v_p: f64,
    pub v_r: f64,
    pub v_iou: f64,
    /// `S / |T_inter|`; `None` when the supports are disjoint.
    pub v_iou_int: Option<f64>,
}

/// Box IoU between the two tubes at timestamp `t`.
///
/// Zero unless both tubes cover `t`.
pub fn frame_iou(pred: &Tube, gt: &Tube, t: u32) -> f64 {
    match (pred.box_at(t), gt.box_at(t)) {
        (Some(p), Some(g)) => p.iou(g),
        _ => 0.0,
    }
}

/// Computes the overlap statistics of a predicted tube against ground truth.
///
/// Errors if the two supports use different sampling rates. The overlap sum
/// is accumulated over the intersection in ascending timestamp order, so a
/// per-timestamp reference loop reproduces it bit for bit.
pub fn overlap_stats(pred: &Tube, gt: &Tube) -> Result<TubeOverlapStats> {
    let inter = pred.support().intersection(gt.support())?;
    let union = pred.support().union(gt.support())?;
    let mut s_sum = 0.0;
    for t in inter.iter() {
        s_sum += frame_iou(pred, gt, t);
    }
    Ok(TubeOverlapStats {
        s_sum,
        n_inter: inter.len(),
        n_union: union.len(),
        n_pred: pred.len(),
        n_gt: gt.len(),
    })
}

/// Temporal precision/recall/IoU from overlap statistics.
///
/// Errors if the ground-truth support is empty. An empty prediction scores
/// zero on all three (callers exclude such records from precision averages).
pub fn temporal_scores(stats: &TubeOverlapStats) -> Result<TemporalScores> {
    check_gt_nonempty(stats)?;
    let n_inter = stats.n_inter as f64;
    Ok(TemporalScores {
        t_p: ratio_or_zero(n_inter, stats.n_pred),
        t_r: n_inter / stats.n_gt as f64,
        t_iou: n_inter / stats.n_union as f64,
    })
}

/// Volumetric precision/recall/IoU from overlap statistics.
///
/// Errors if the ground-truth support is empty.
pub fn spatiotemporal_scores(stats: &TubeOverlapStats) -> Result<SpatioTemporalScores> {
    check_gt_nonempty(stats)?;
    Ok(SpatioTemporalScores {
        v_p: ratio_or_zero(stats.s_sum, stats.n_pred),
        v_r: stats.s_sum / stats.n_gt as f64,
        v_iou: stats.s_sum / stats.n_union as f64,
        v_iou_int: (stats.n_inter > 0).then(|| stats.s_sum / stats.n_inter as f64),
    })
}

fn check_gt_nonempty(stats: &TubeOverlapStats) -> Result<()> {
    if stats.n_gt == 0 {
        return Err(Error::InvalidAnnotation {
            query_id: String::new(),
            reason: "ground-truth tube has an empty support".into(),
        });
    }
    Ok(())
}

fn ratio_or_zero(num: f64, denom: usize) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num / denom as f64
    }
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Scores of a single query, tagged with the slices it belongs to.
#[derive(Debug, Clone)]
pub struct StgRecord {
    pub query_id: String,
    pub temporal: TemporalScores,
    pub spatial: SpatioTemporalScores,
    /// Whether the model produced a non-empty tube for this query.
    pub has_prediction: bool,
    /// Slice cells this record contributes to (always includes the overall
    /// slice).
    pub slices: Vec<SliceKey>,
}

/// Mean scores of one slice cell.
///
/// Recall-family metrics average over every record (queries without a
/// prediction contribute zero). Precision-family metrics average only over
/// records with a non-empty prediction and are `None` when there are none.
/// `vIoU-Int` averages only over records where it is defined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StgAggregate {
    /// Number of records in the cell.
    pub n: usize,
    /// Records with a non-empty prediction.
    pub n_with_prediction: usize,
    /// Records whose supports overlap ground truth.
    pub n_with_overlap: usize,
    pub t_p: Option<f64>,
    pub t_r: f64,
    pub t_iou: f64,
    pub v_p: Option<f64>,
    pub v_r: f64,
    pub v_iou: f64,
    pub v_iou_int: Option<f64>,
}

/// Averages records into per-slice aggregates.
///
/// Sums are accumulated in the order records are supplied, so a fixed record
/// order yields bitwise-identical aggregates.
pub fn aggregate_stg(records: &[StgRecord]) -> BTreeMap<SliceKey, StgAggregate> {
    #[derive(Default)]
    struct Acc {
        n: usize,
        n_pred: usize,
        n_overlap: usize,
        t_p: f64,
        t_r: f64,
        t_iou: f64,
        v_p: f64,
        v_r: f64,
        v_iou: f64,
        v_iou_int: f64,
    }

    let mut cells: BTreeMap<SliceKey, Acc> = BTreeMap::new();
    for record in records {
        for key in &record.slices {
            let acc = cells.entry(key.clone()).or_default();
            acc.n += 1;
            acc.t_r += record.temporal.t_r;
            acc.t_iou += record.temporal.t_iou;
            acc.v_r += record.spatial.v_r;
            acc.v_iou += record.spatial.v_iou;
            if record.has_prediction {
                acc.n_pred += 1;
                acc.t_p += record.temporal.t_p;
                acc.v_p += record.spatial.v_p;
            }
            if let Some(v) = record.spatial.v_iou_int {
                acc.n_overlap += 1;
                acc.v_iou_int += v;
            }
        }
    }

    cells
        .into_iter()
        .map(|(key, acc)| {
            let mean = |sum: f64, n: usize| (n > 0).then(|| sum / n as f64);
            let aggregate = StgAggregate {
                n: acc.n,
                n_with_prediction: acc.n_pred,
                n_with_overlap: acc.n_overlap,
                t_p: mean(acc.t_p, acc.n_pred),
                t_r: acc.t_r / acc.n as f64,
                t_iou: acc.t_iou / acc.n as f64,
                v_p: mean(acc.v_p, acc.n_pred),
                v_r: acc.v_r / acc.n as f64,
                v_iou: acc.v_iou / acc.n as f64,
                v_iou_int: mean(acc.v_iou_int, acc.n_overlap),
            };
            (key, aggregate)
        })
        .collect()
}
