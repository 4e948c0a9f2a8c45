//! Temporal retrieval metrics over continuous-time interval sets.
//!
//! Each query yields interval precision, recall, and IoU between the
//! predicted and ground-truth interval sets. A query set is then summarised
//! by sweeping an acceptance threshold over a fixed grid: for each threshold
//! the accuracy is the fraction of queries whose score meets it, and the
//! area under that curve (one per metric) is the headline number.

use crate::error::Error;
use crate::model::IntervalSet;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Number of points in the threshold grid (`0.00, 0.01, ..., 1.00`).
pub const THRESHOLD_GRID_LEN: usize = 101;

/// Interval precision, recall, and IoU for one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalScores {
    pub precision: f64,
    pub recall: f64,
    pub iou: f64,
}

/// Which per-query score a threshold curve sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Iou,
    Precision,
    Recall,
}

impl MetricKind {
    pub fn label(&self) -> &'static str {
        match self {
            MetricKind::Iou => "iou",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
        }
    }
}

/// One point of a threshold-sweep curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Accuracy as a function of the acceptance threshold, on the fixed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCurve {
    pub metric: MetricKind,
    pub points: Vec<CurvePoint>,
}

/// Threshold curves and their areas for one query set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrSummary {
    pub iou_auc: f64,
    pub precision_auc: f64,
    pub recall_auc: f64,
    /// Curves in report order: IoU, precision, recall.
    pub curves: Vec<ThresholdCurve>,
}

/// Scores one query's predicted interval set against ground truth.
///
/// A prediction with zero total measure scores `(0, 0, 0)`. Ground truth
/// with zero total measure is an annotation error.
pub fn interval_scores(pred: &IntervalSet, gt: &IntervalSet) -> Result<IntervalScores> {
    let gt_measure = gt.measure();
    if gt_measure <= 0.0 {
        return Err(Error::InvalidAnnotation {
            query_id: String::new(),
            reason: "ground-truth interval set has zero measure".into(),
        });
    }
    let pred_measure = pred.measure();
    if pred_measure <= 0.0 {
        return Ok(IntervalScores {
            precision: 0.0,
            recall: 0.0,
            iou: 0.0,
        });
    }
    let inter = pred.intersection_measure(gt);
    let union = pred_measure + gt_measure - inter;
    Ok(IntervalScores {
        precision: inter / pred_measure,
        recall: inter / gt_measure,
        iou: inter / union,
    })
}

/// Sweeps the acceptance threshold over the fixed grid.
///
/// `accuracy(t)` is the fraction of values `v` with `v >= t` (inclusive, so
/// the curve always starts at 1.0 for threshold 0). Errors on an empty
/// value list.
pub fn threshold_curve(values: &[f64], metric: MetricKind) -> Result<ThresholdCurve> {
    if values.is_empty() {
        return Err(Error::EmptyQuerySet {
            context: "threshold curve needs at least one query score",
        });
    }
    let n = values.len() as f64;
    let points = (0..THRESHOLD_GRID_LEN)
        .map(|k| {
            let threshold = k as f64 / 100.0;
            let hits = values.iter().filter(|&&v| v >= threshold).count();
            CurvePoint {
                threshold,
                accuracy: hits as f64 / n,
            }
        })
        .collect();
    Ok(ThresholdCurve { metric, points })
}

/// Area under a threshold curve by the trapezoid rule, clamped to `[0, 1]`.
pub fn auc(curve: &ThresholdCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        let dt = pair[1].threshold - pair[0].threshold;
        area += dt * (pair[0].accuracy + pair[1].accuracy) / 2.0;
    }
    area.clamp(0.0, 1.0)
}

/// Builds the three curves and their areas for a set of per-query scores.
pub fn summarize(scores: &[IntervalScores]) -> Result<TrSummary> {
    let ious: Vec<f64> = scores.iter().map(|s| s.iou).collect();
    let precisions: Vec<f64> = scores.iter().map(|s| s.precision).collect();
    let recalls: Vec<f64> = scores.iter().map(|s| s.recall).collect();
    let iou_curve = threshold_curve(&ious, MetricKind::Iou)?;
    let precision_curve = threshold_curve(&precisions, MetricKind::Precision)?;
    let recall_curve = threshold_curve(&recalls, MetricKind::Recall)?;
    Ok(TrSummary {
        iou_auc: auc(&iou_curve),
        precision_auc: auc(&precision_curve),
        recall_auc: auc(&recall_curve),
        curves: vec![iou_curve, precision_curve, recall_curve],
    })
}

/// Renders curves as CSV with a `metric,threshold,accuracy` header; one row
/// per grid point per curve, in the order the curves are given.
pub fn curves_to_csv(curves: &[ThresholdCurve]) -> String {
    let mut out = String::from("metric,threshold,accuracy\n");
    for curve in curves {
        for point in &curve.points {
            out.push_str(&format!(
                "{},{:.2},{:.6}\n",
                curve.metric.label(),
                point.threshold,
                point.accuracy
            ));
        }
    }
    out
}
