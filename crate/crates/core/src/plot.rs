//! Plot and character-track metrics: transcript segment matching, corpus
//! word error rate, box-track `sIoU`, and multiple-choice accuracy.
//!
//! Predicted transcript segments are matched one-to-one against ground
//! truth by maximising total temporal IoU; pairs with zero overlap are
//! never matched. Matched pairs then feed three scores: the mean temporal
//! IoU of the pairs, a corpus-level word error rate over the concatenated
//! matched texts, and a box-level `sIoU` over boxes paired by timestamp.

use crate::assignment::max_weight_assignment;
use crate::error::Error;
use crate::model::{BoundingBox, Interval};
use crate::Result;

/// Slack allowed between a box timestamp and its segment's time span.
pub const BOX_TIMESTAMP_TOLERANCE_S: f64 = 0.5;

/// Maximum timestamp difference for pairing predicted and ground-truth
/// boxes within a matched segment pair.
pub const BOX_PAIRING_TOLERANCE_S: f64 = 0.020;

/// Two candidate matchings within this total-IoU distance count as tied and
/// are resolved by segment order.
const MATCH_TIE_EPS: f64 = 1e-9;

/// A bounding box stamped with the time it was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedBox {
    pub timestamp_s: f64,
    pub bbox: BoundingBox,
}

/// A speech segment: a time span, the text spoken, and an optional box
/// track for the speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptSegment {
    start_s: f64,
    end_s: f64,
    text: String,
    boxes: Vec<TimedBox>,
}

impl TranscriptSegment {
    /// Builds a segment; the span must be a valid interval and each box
    /// timestamp must fall within the span give or take
    /// [`BOX_TIMESTAMP_TOLERANCE_S`]. Boxes are stored in a canonical
    /// order, so construction is insensitive to input order.
    pub fn new(
        start_s: f64,
        end_s: f64,
        text: impl Into<String>,
        mut boxes: Vec<TimedBox>,
    ) -> Result<Self> {
        Interval::new(start_s, end_s)?;
        for tb in &boxes {
            if !tb.timestamp_s.is_finite() || tb.timestamp_s < 0.0 {
                return Err(Error::InvalidAnnotation {
                    query_id: String::new(),
                    reason: format!("box timestamp {} is not a valid time", tb.timestamp_s),
                });
            }
            if tb.timestamp_s < start_s - BOX_TIMESTAMP_TOLERANCE_S
                || tb.timestamp_s > end_s + BOX_TIMESTAMP_TOLERANCE_S
            {
                return Err(Error::InvalidAnnotation {
                    query_id: String::new(),
                    reason: format!(
                        "box timestamp {} outside segment [{}, {}]",
                        tb.timestamp_s, start_s, end_s
                    ),
                });
            }
        }
        boxes.sort_by(|a, b| {
            a.timestamp_s
                .total_cmp(&b.timestamp_s)
                .then_with(|| a.bbox.cmp_corners(&b.bbox))
        });
        Ok(Self {
            start_s,
            end_s,
            text: text.into(),
            boxes,
        })
    }

    pub fn start_s(&self) -> f64 {
        self.start_s
    }

    pub fn end_s(&self) -> f64 {
        self.end_s
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn boxes(&self) -> &[TimedBox] {
        &self.boxes
    }

    /// IoU of the two time spans; zero when the union is degenerate.
    pub fn temporal_iou(&self, other: &TranscriptSegment) -> f64 {
        let inter = (self.end_s.min(other.end_s) - self.start_s.max(other.start_s)).max(0.0);
        let union = (self.end_s - self.start_s) + (other.end_s - other.start_s) - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

// ---------------------------------------------------------------------------
// Segment matching
// ---------------------------------------------------------------------------

/// One matched ground-truth/prediction segment pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub gt_idx: usize,
    pub pred_idx: usize,
    pub t_iou: f64,
}

/// Result of the one-to-one segment matching.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatching {
    /// Pairs ordered by ground-truth start time.
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_pred: Vec<usize>,
    /// Sum of `t_iou` over the pairs.
    pub total_t_iou: f64,
}

impl SegmentMatching {
    /// Mean temporal IoU over matched pairs; zero when nothing matched.
    pub fn mean_t_iou(&self) -> f64 {
        if self.pairs.is_empty() {
            0.0
        } else {
            self.total_t_iou / self.pairs.len() as f64
        }
    }
}

/// Matches predicted segments to ground truth one-to-one, maximising the
/// total temporal IoU. Pairs with zero IoU are never matched.
///
/// Among matchings of maximal total IoU, the result is canonical: walking
/// ground-truth segments by ascending start time (then input index), each
/// takes the earliest-starting prediction consistent with a maximal total.
/// The outcome therefore does not depend on input order.
pub fn match_segments(gt: &[TranscriptSegment], pred: &[TranscriptSegment]) -> SegmentMatching {
    let weights: Vec<Vec<f64>> = gt
        .iter()
        .map(|g| pred.iter().map(|p| g.temporal_iou(p)).collect())
        .collect();

    let by_start = |items: &[TranscriptSegment]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.sort_by(|&a, &b| {
            items[a]
                .start_s
                .total_cmp(&items[b].start_s)
                .then(a.cmp(&b))
        });
        order
    };
    let gt_order = by_start(gt);
    let pred_order = by_start(pred);

    let solve = |gts: &[usize], preds: &[usize]| -> f64 {
        if gts.is_empty() || preds.is_empty() {
            return 0.0;
        }
        let sub: Vec<Vec<f64>> = gts
            .iter()
            .map(|&g| preds.iter().map(|&p| weights[g][p]).collect())
            .collect();
        max_weight_assignment(&sub).0
    };

    let best_total = solve(&gt_order, &pred_order);
    let mut available: Vec<usize> = pred_order;
    let mut pairs = Vec::new();
    let mut fixed_total = 0.0;

    for (pos, &g) in gt_order.iter().enumerate() {
        let rest_gts = &gt_order[pos + 1..];
        let mut chosen = None;
        for (slot, &p) in available.iter().enumerate() {
            let w = weights[g][p];
            if w <= 0.0 {
                continue;
            }
            let rest_preds: Vec<usize> = available
                .iter()
                .enumerate()
                .filter_map(|(i, &q)| (i != slot).then_some(q))
                .collect();
            if fixed_total + w + solve(rest_gts, &rest_preds) >= best_total - MATCH_TIE_EPS {
                chosen = Some((slot, p, w));
                break;
            }
        }
        if let Some((slot, p, w)) = chosen {
            available.remove(slot);
            fixed_total += w;
            pairs.push(MatchedPair {
                gt_idx: g,
                pred_idx: p,
                t_iou: w,
            });
        }
    }

    let matched_gt: std::collections::HashSet<usize> = pairs.iter().map(|p| p.gt_idx).collect();
    let matched_pred: std::collections::HashSet<usize> = pairs.iter().map(|p| p.pred_idx).collect();
    SegmentMatching {
        total_t_iou: fixed_total,
        unmatched_gt: (0..gt.len()).filter(|i| !matched_gt.contains(i)).collect(),
        unmatched_pred: (0..pred.len())
            .filter(|i| !matched_pred.contains(i))
            .collect(),
        pairs,
    }
}

// ---------------------------------------------------------------------------
// Word error rate
// ---------------------------------------------------------------------------

/// Splits text into comparison tokens: whitespace-separated words, case
/// folded, with leading and trailing punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Minimal-edit alignment counts `(substitutions, deletions, insertions)`
/// between token sequences. Equal-cost alignments resolve canonically:
/// match/substitute first, then delete, then insert.
pub fn word_edit_counts(reference: &[String], hypothesis: &[String]) -> (usize, usize, usize) {
    let n = reference.len();
    let m = hypothesis.len();
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }

    let (mut i, mut j) = (n, m);
    let (mut subs, mut dels, mut inss) = (0, 0, 0);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            if d[i][j] == d[i - 1][j - 1] + cost {
                subs += cost;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            dels += 1;
            i -= 1;
        } else {
            inss += 1;
            j -= 1;
        }
    }
    (subs, dels, inss)
}

/// Edit counts of one corpus alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference length in tokens.
    pub n_ref: usize,
}

impl WerBreakdown {
    /// `(S + D + I) / N`. With an empty reference the denominator is
    /// clamped to one, so stray hypothesis words still register.
    pub fn wer(&self) -> f64 {
        let edits = (self.substitutions + self.deletions + self.insertions) as f64;
        if self.n_ref > 0 {
            edits / self.n_ref as f64
        } else if self.insertions > 0 {
            self.insertions as f64
        } else {
            0.0
        }
    }

    /// True when the rate was computed against an empty reference.
    pub fn reference_was_empty(&self) -> bool {
        self.n_ref == 0 && self.insertions > 0
    }

    /// Merges counts from another alignment (used for pooling queries).
    pub fn absorb(&mut self, other: &WerBreakdown) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.n_ref += other.n_ref;
    }
}

/// Corpus word error rate over one query's matched segment pairs.
///
/// The reference is the concatenation of matched ground-truth texts in
/// ground-truth start order, the hypothesis the corresponding predicted
/// texts in the same pair order; both are aligned once.
pub fn corpus_wer(
    matching: &SegmentMatching,
    gt: &[TranscriptSegment],
    pred: &[TranscriptSegment],
) -> WerBreakdown {
    let mut reference = Vec::new();
    let mut hypothesis = Vec::new();
    for pair in &matching.pairs {
        reference.extend(tokenize(gt[pair.gt_idx].text()));
        hypothesis.extend(tokenize(pred[pair.pred_idx].text()));
    }
    let (substitutions, deletions, insertions) = word_edit_counts(&reference, &hypothesis);
    WerBreakdown {
        substitutions,
        deletions,
        insertions,
        n_ref: reference.len(),
    }
}

// ---------------------------------------------------------------------------
// Box-track sIoU
// ---------------------------------------------------------------------------

/// Box pairing counts over matched segment pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxMatchStats {
    /// Sum of box IoU over paired boxes.
    pub sum_iou: f64,
    /// Number of paired boxes.
    pub n_pairs: usize,
    /// Ground-truth boxes inside matched segments (the coverage
    /// denominator).
    pub n_gt_boxes: usize,
}

impl BoxMatchStats {
    /// Mean box IoU over paired boxes (`sIoU`); zero when nothing paired.
    pub fn mean_iou(&self) -> f64 {
        if self.n_pairs == 0 {
            0.0
        } else {
            self.sum_iou / self.n_pairs as f64
        }
    }

    /// Fraction of ground-truth boxes that found a partner, if there were
    /// any to find.
    pub fn coverage(&self) -> Option<f64> {
        (self.n_gt_boxes > 0).then(|| self.n_pairs as f64 / self.n_gt_boxes as f64)
    }

    pub fn absorb(&mut self, other: &BoxMatchStats) {
        self.sum_iou += other.sum_iou;
        self.n_pairs += other.n_pairs;
        self.n_gt_boxes += other.n_gt_boxes;
    }
}

/// Pairs boxes within each matched segment pair and scores their overlap.
///
/// Within a pair, ground-truth and predicted boxes are paired greedily by
/// ascending timestamp difference (ties by box order), each box used at
/// most once, and only differences within `tolerance_s` qualify.
pub fn match_boxes(
    matching: &SegmentMatching,
    gt: &[TranscriptSegment],
    pred: &[TranscriptSegment],
    tolerance_s: f64,
) -> BoxMatchStats {
    let mut stats = BoxMatchStats::default();
    for pair in &matching.pairs {
        let gt_boxes = gt[pair.gt_idx].boxes();
        let pred_boxes = pred[pair.pred_idx].boxes();
        stats.n_gt_boxes += gt_boxes.len();
        if gt_boxes.is_empty() || pred_boxes.is_empty() {
            continue;
        }

        let mut candidates = Vec::with_capacity(gt_boxes.len() * pred_boxes.len());
        for (gi, g) in gt_boxes.iter().enumerate() {
            for (pi, p) in pred_boxes.iter().enumerate() {
                let dt = (g.timestamp_s - p.timestamp_s).abs();
                if dt <= tolerance_s {
                    candidates.push((dt, gi, pi));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut gt_used = vec![false; gt_boxes.len()];
        let mut pred_used = vec![false; pred_boxes.len()];
        for (_, gi, pi) in candidates {
            if !gt_used[gi] && !pred_used[pi] {
                gt_used[gi] = true;
                pred_used[pi] = true;
                stats.sum_iou += gt_boxes[gi].bbox.iou(&pred_boxes[pi].bbox);
                stats.n_pairs += 1;
            }
        }
    }
    stats
}

// ---------------------------------------------------------------------------
// Whole-query scoring
// ---------------------------------------------------------------------------

/// Everything a slice aggregate needs from one character-track query.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotQueryStats {
    pub matching: SegmentMatching,
    pub wer: WerBreakdown,
    pub boxes: BoxMatchStats,
    pub n_gt_segments: usize,
    pub n_pred_segments: usize,
}

/// Runs matching, corpus WER, and box pairing for one query.
pub fn score_plot_query(gt: &[TranscriptSegment], pred: &[TranscriptSegment]) -> PlotQueryStats {
    let matching = match_segments(gt, pred);
    let wer = corpus_wer(&matching, gt, pred);
    let boxes = match_boxes(&matching, gt, pred, BOX_PAIRING_TOLERANCE_S);
    PlotQueryStats {
        wer,
        boxes,
        n_gt_segments: gt.len(),
        n_pred_segments: pred.len(),
        matching,
    }
}

// ---------------------------------------------------------------------------
// Multiple choice
// ---------------------------------------------------------------------------

/// One multiple-choice question with the model's (possibly absent) answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McItem {
    pub query_id: String,
    pub n_options: usize,
    pub gt_answer: usize,
    /// `None` when the model refused or no option could be extracted.
    pub pred_answer: Option<usize>,
}

impl McItem {
    pub fn new(
        query_id: impl Into<String>,
        n_options: usize,
        gt_answer: usize,
        pred_answer: Option<usize>,
    ) -> Result<Self> {
        let query_id = query_id.into();
        if gt_answer >= n_options {
            return Err(Error::InvalidAnnotation {
                query_id,
                reason: format!("answer index {gt_answer} out of range for {n_options} options"),
            });
        }
        if let Some(a) = pred_answer {
            if a >= n_options {
                return Err(Error::InvalidAnnotation {
                    query_id,
                    reason: format!("predicted index {a} out of range for {n_options} options"),
                });
            }
        }
        Ok(Self {
            query_id,
            n_options,
            gt_answer,
            pred_answer,
        })
    }

    pub fn is_correct(&self) -> bool {
        self.pred_answer == Some(self.gt_answer)
    }
}

/// Exact-match accuracy; absent answers count as incorrect. Errors on an
/// empty item list.
pub fn mc_accuracy(items: &[McItem]) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::EmptyQuerySet {
            context: "accuracy needs at least one question",
        });
    }
    let correct = items.iter().filter(|i| i.is_correct()).count();
    Ok(correct as f64 / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: f64, end: f64, text: &str) -> TranscriptSegment {
        TranscriptSegment::new(start, end, text, Vec::new()).unwrap()
    }

    fn seg_with_boxes(start: f64, end: f64, boxes: &[(f64, [f64; 4])]) -> TranscriptSegment {
        let boxes = boxes
            .iter()
            .map(|(t, c)| TimedBox {
                timestamp_s: *t,
                bbox: BoundingBox::new(c[0], c[1], c[2], c[3]).unwrap(),
            })
            .collect();
        TranscriptSegment::new(start, end, "", boxes).unwrap()
    }

    #[test]
    fn segment_validation() {
        assert!(TranscriptSegment::new(5.0, 3.0, "x", Vec::new()).is_err());
        let in_slack = TimedBox {
            timestamp_s: 9.4,
            bbox: BoundingBox::new(0.0, 0.0, 0.5, 0.5).unwrap(),
        };
        assert!(TranscriptSegment::new(0.0, 9.0, "x", vec![in_slack]).is_ok());
        let out_of_slack = TimedBox {
            timestamp_s: 9.6,
            ..in_slack
        };
        assert!(TranscriptSegment::new(0.0, 9.0, "x", vec![out_of_slack]).is_err());
    }

    #[test]
    fn segment_temporal_iou() {
        let a = seg(0.0, 10.0, "");
        let b = seg(5.0, 15.0, "");
        assert!((a.temporal_iou(&b) - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.temporal_iou(&seg(20.0, 30.0, "")), 0.0);
        assert_eq!(a.temporal_iou(&a), 1.0);
        // Degenerate spans never overlap.
        let point = seg(5.0, 5.0, "");
        assert_eq!(point.temporal_iou(&point), 0.0);
    }

    #[test]
    fn matching_prefers_the_earlier_ground_truth_on_ties() {
        // Both ground-truth segments overlap the single prediction at the
        // same IoU of 1/3; the earlier one wins the pair.
        let gt = vec![seg(0.0, 10.0, "a"), seg(10.0, 20.0, "b")];
        let pred = vec![seg(5.0, 15.0, "p")];
        let m = match_segments(&gt, &pred);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].gt_idx, 0);
        assert_eq!(m.pairs[0].pred_idx, 0);
        assert!((m.pairs[0].t_iou - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.unmatched_gt, vec![1]);
        assert!(m.unmatched_pred.is_empty());
    }

    #[test]
    fn matching_prefers_the_earlier_prediction_on_ties() {
        let gt = vec![seg(0.0, 10.0, "a")];
        let pred = vec![seg(0.0, 10.0, "p0"), seg(0.0, 10.0, "p1")];
        let m = match_segments(&gt, &pred);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].pred_idx, 0);
        assert_eq!(m.unmatched_pred, vec![1]);
    }

    #[test]
    fn matching_maximises_total_iou_not_greedy_order() {
        // Greedily giving pred0 to gt0 (its best) leaves gt1 with a weak
        // partner; the optimum crosses, handing gt1 its perfect match.
        let gt = vec![seg(0.0, 10.0, ""), seg(2.0, 12.0, "")];
        let pred = vec![seg(2.0, 12.0, ""), seg(9.0, 19.0, "")];
        let m = match_segments(&gt, &pred);
        assert_eq!(m.pairs.len(), 2);
        let by_gt: std::collections::HashMap<usize, usize> =
            m.pairs.iter().map(|p| (p.gt_idx, p.pred_idx)).collect();
        assert_eq!(by_gt[&0], 1);
        assert_eq!(by_gt[&1], 0);
        // Crossed total: 1/19 + 1; uncrossed would be 2/3 + 3/17.
        assert!((m.total_t_iou - (1.0 / 19.0 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn matching_never_pairs_disjoint_segments() {
        let gt = vec![seg(0.0, 5.0, "")];
        let pred = vec![seg(10.0, 15.0, "")];
        let m = match_segments(&gt, &pred);
        assert!(m.pairs.is_empty());
        assert_eq!(m.unmatched_gt, vec![0]);
        assert_eq!(m.unmatched_pred, vec![0]);
        assert_eq!(m.mean_t_iou(), 0.0);
    }

    #[test]
    fn matching_is_invariant_to_prediction_order() {
        let gt = vec![seg(0.0, 10.0, ""), seg(12.0, 20.0, ""), seg(25.0, 30.0, "")];
        let preds = vec![seg(1.0, 9.0, ""), seg(13.0, 19.0, ""), seg(24.0, 31.0, "")];
        let straight = match_segments(&gt, &preds);

        let shuffled = vec![preds[2].clone(), preds[0].clone(), preds[1].clone()];
        let remap = [1usize, 2, 0]; // original index -> shuffled index
        let reshuffled = match_segments(&gt, &shuffled);

        assert_eq!(straight.pairs.len(), reshuffled.pairs.len());
        for pair in &straight.pairs {
            assert!(reshuffled
                .pairs
                .iter()
                .any(|q| q.gt_idx == pair.gt_idx && q.pred_idx == remap[pair.pred_idx]));
        }
    }

    #[test]
    fn identical_segment_lists_match_diagonally() {
        let gt = vec![
            seg(0.0, 4.0, "first line"),
            seg(4.0, 9.0, "second line"),
            seg(4.0, 9.0, "same span third"),
        ];
        let m = match_segments(&gt, &gt);
        assert_eq!(m.pairs.len(), 3);
        for pair in &m.pairs {
            assert_eq!(pair.gt_idx, pair.pred_idx);
            assert!((pair.t_iou - 1.0).abs() < 1e-12);
        }
        assert!((m.mean_t_iou() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tokenizer_folds_case_and_strips_punctuation() {
        assert_eq!(tokenize("Hello, World!"), vec!["hello", "world"]);
        assert_eq!(tokenize("  it's   FINE. "), vec!["it's", "fine"]);
        assert_eq!(tokenize("--- ... !!"), Vec::<String>::new());
        assert_eq!(tokenize(""), Vec::<String>::new());
    }

    fn toks(words: &str) -> Vec<String> {
        tokenize(words)
    }

    #[test]
    fn edit_counts_frozen_cases() {
        // One insertion against a two-word reference.
        let (s, d, i) = word_edit_counts(&toks("hello world"), &toks("hello there world"));
        assert_eq!((s, d, i), (0, 0, 1));

        // One substitution against a three-word reference.
        let (s, d, i) = word_edit_counts(&toks("the cat sat"), &toks("the hat sat"));
        assert_eq!((s, d, i), (1, 0, 0));

        // One deletion.
        let (s, d, i) = word_edit_counts(&toks("a b c"), &toks("a c"));
        assert_eq!((s, d, i), (0, 1, 0));

        let (s, d, i) = word_edit_counts(&toks("same text"), &toks("same text"));
        assert_eq!((s, d, i), (0, 0, 0));
    }

    #[test]
    fn wer_values() {
        let one_insertion = WerBreakdown {
            insertions: 1,
            n_ref: 2,
            ..Default::default()
        };
        assert!((one_insertion.wer() - 0.5).abs() < 1e-12);

        let one_sub = WerBreakdown {
            substitutions: 1,
            n_ref: 3,
            ..Default::default()
        };
        assert!((one_sub.wer() - 1.0 / 3.0).abs() < 1e-12);

        // Empty reference, stray hypothesis words: denominator clamps to 1.
        let stray = WerBreakdown {
            insertions: 4,
            n_ref: 0,
            ..Default::default()
        };
        assert_eq!(stray.wer(), 4.0);
        assert!(stray.reference_was_empty());

        let silent = WerBreakdown::default();
        assert_eq!(silent.wer(), 0.0);
        assert!(!silent.reference_was_empty());
    }

    #[test]
    fn corpus_wer_concatenates_in_ground_truth_order() {
        let gt = vec![seg(10.0, 20.0, "world again"), seg(0.0, 9.0, "hello")];
        let pred = vec![seg(0.5, 9.5, "hello"), seg(10.0, 20.0, "world again")];
        let m = match_segments(&gt, &pred);
        assert_eq!(m.pairs.len(), 2);
        let wer = corpus_wer(&m, &gt, &pred);
        assert_eq!(wer.n_ref, 3);
        assert_eq!(wer.wer(), 0.0);
    }

    #[test]
    fn box_pairing_identity_and_tolerance() {
        let track = [
            (1.0, [0.1, 0.1, 0.4, 0.4]),
            (2.0, [0.2, 0.2, 0.5, 0.5]),
            (3.0, [0.3, 0.3, 0.6, 0.6]),
        ];
        let gt = vec![seg_with_boxes(0.0, 4.0, &track)];
        let m = match_segments(&gt, &gt);
        let stats = match_boxes(&m, &gt, &gt, BOX_PAIRING_TOLERANCE_S);
        assert_eq!(stats.n_pairs, 3);
        assert_eq!(stats.n_gt_boxes, 3);
        assert!((stats.mean_iou() - 1.0).abs() < 1e-12);
        assert_eq!(stats.coverage(), Some(1.0));

        // Jitter within tolerance still pairs; beyond it does not.
        let near = vec![seg_with_boxes(
            0.0,
            4.0,
            &[(1.015, [0.1, 0.1, 0.4, 0.4]), (2.5, [0.2, 0.2, 0.5, 0.5])],
        )];
        let m = match_segments(&gt, &near);
        let stats = match_boxes(&m, &gt, &near, BOX_PAIRING_TOLERANCE_S);
        assert_eq!(stats.n_pairs, 1);
        assert!((stats.mean_iou() - 1.0).abs() < 1e-12);
        assert_eq!(stats.coverage(), Some(1.0 / 3.0));
    }

    #[test]
    fn box_pairing_uses_each_box_once() {
        // Two predicted boxes near one ground-truth box: only the closer
        // pairs; the other stays unused.
        let gt = vec![seg_with_boxes(0.0, 4.0, &[(2.0, [0.1, 0.1, 0.4, 0.4])])];
        let pred = vec![seg_with_boxes(
            0.0,
            4.0,
            &[(2.018, [0.0, 0.0, 1.0, 1.0]), (2.005, [0.1, 0.1, 0.4, 0.4])],
        )];
        let m = match_segments(&gt, &pred);
        let stats = match_boxes(&m, &gt, &pred, BOX_PAIRING_TOLERANCE_S);
        assert_eq!(stats.n_pairs, 1);
        assert!((stats.mean_iou() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_stats_with_no_gt_boxes_have_no_coverage() {
        let gt = vec![seg(0.0, 4.0, "x")];
        let m = match_segments(&gt, &gt);
        let stats = match_boxes(&m, &gt, &gt, BOX_PAIRING_TOLERANCE_S);
        assert_eq!(stats.n_gt_boxes, 0);
        assert_eq!(stats.coverage(), None);
        assert_eq!(stats.mean_iou(), 0.0);
    }

    #[test]
    fn whole_query_identity_scores_perfectly() {
        let gt = vec![
            seg_with_boxes(0.0, 4.0, &[(1.0, [0.1, 0.1, 0.4, 0.4])]),
            seg(5.0, 9.0, "spoken words here"),
        ];
        let stats = score_plot_query(&gt, &gt);
        assert!((stats.matching.mean_t_iou() - 1.0).abs() < 1e-12);
        assert_eq!(stats.wer.wer(), 0.0);
        assert!((stats.boxes.mean_iou() - 1.0).abs() < 1e-12);
        assert_eq!(stats.n_gt_segments, 2);
        assert_eq!(stats.n_pred_segments, 2);
    }

    #[test]
    fn mc_item_validation_and_accuracy() {
        assert!(McItem::new("q", 4, 5, None).is_err());
        assert!(McItem::new("q", 4, 1, Some(9)).is_err());
        assert!(mc_accuracy(&[]).is_err());

        // Five correct answers and one refusal out of six.
        let mut items: Vec<McItem> = (0..5)
            .map(|k| McItem::new(format!("q{k}"), 5, 2, Some(2)).unwrap())
            .collect();
        items.push(McItem::new("q5", 5, 2, None).unwrap());
        let acc = mc_accuracy(&items).unwrap();
        assert!((acc - 5.0 / 6.0).abs() < 1e-12);

        // A wrong answer scores the same as a refusal.
        items[5].pred_answer = Some(3);
        let acc = mc_accuracy(&items).unwrap();
        assert!((acc - 5.0 / 6.0).abs() < 1e-12);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        /// Reference matcher: enumerate every assignment of ground-truth
        /// rows to prediction columns (or none), keep the maximal total.
        fn brute_best_total(weights: &[Vec<f64>]) -> f64 {
            fn go(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
                if row == weights.len() {
                    return 0.0;
                }
                let mut best = go(weights, row + 1, used);
                for col in 0..used.len() {
                    if !used[col] && weights[row][col] > 0.0 {
                        used[col] = true;
                        let t = weights[row][col] + go(weights, row + 1, used);
                        used[col] = false;
                        best = best.max(t);
                    }
                }
                best
            }
            let cols = weights.first().map_or(0, Vec::len);
            go(weights, 0, &mut vec![false; cols])
        }

        fn arb_segments(
            n: std::ops::Range<usize>,
        ) -> impl Strategy<Value = Vec<TranscriptSegment>> {
            proptest::collection::vec((0u32..30, 1u32..10), n).prop_map(|spans| {
                spans
                    .into_iter()
                    .map(|(s, len)| seg(s as f64, (s + len) as f64, ""))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn matching_total_is_optimal(
                gt in arb_segments(0..5),
                pred in arb_segments(0..5),
            ) {
                let weights: Vec<Vec<f64>> = gt
                    .iter()
                    .map(|g| pred.iter().map(|p| g.temporal_iou(p)).collect())
                    .collect();
                let m = match_segments(&gt, &pred);
                let best = brute_best_total(&weights);
                prop_assert!((m.total_t_iou - best).abs() < 1e-9);
                // One-to-one and IoU-positive.
                let mut gt_seen = std::collections::HashSet::new();
                let mut pred_seen = std::collections::HashSet::new();
                for pair in &m.pairs {
                    prop_assert!(gt_seen.insert(pair.gt_idx));
                    prop_assert!(pred_seen.insert(pair.pred_idx));
                    prop_assert!(pair.t_iou > 0.0);
                }
            }

            #[test]
            fn wer_is_zero_iff_tokens_match(
                a in "[a-c ]{0,16}",
                b in "[a-c ]{0,16}",
            ) {
                let ta = tokenize(&a);
                let tb = tokenize(&b);
                let (s, d, i) = word_edit_counts(&ta, &tb);
                if ta == tb {
                    prop_assert_eq!((s, d, i), (0, 0, 0));
                } else {
                    prop_assert!(s + d + i > 0);
                }
                // Edit count is bounded by the longer sequence.
                prop_assert!(s + d + i <= ta.len().max(tb.len()));
            }

            #[test]
            fn swapping_sides_swaps_deletions_and_insertions(
                a in "[a-c ]{0,12}",
                b in "[a-c ]{0,12}",
            ) {
                let ta = tokenize(&a);
                let tb = tokenize(&b);
                let (s1, d1, i1) = word_edit_counts(&ta, &tb);
                let (s2, d2, i2) = word_edit_counts(&tb, &ta);
                prop_assert_eq!(s1 + d1 + i1, s2 + i2 + d2);
                prop_assert_eq!(ta.len() + i1, tb.len() + d1);
            }
        }
    }
}
