//! Deterministic synthetic-input generators for the benchmark suite.
//!
//! Everything is seeded so benchmark runs measure the same workload every
//! time.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use vgeval_core::plot::{TimedBox, TranscriptSegment};
use vgeval_core::tr::IntervalScores;
use vgeval_core::{BoundingBox, IntervalSet, TemporalSupport, Tube};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random box with both side lengths at least `min_side`.
pub fn random_box(rng: &mut ChaCha8Rng, min_side: f64) -> BoundingBox {
    let w = rng.random_range(min_side..=1.0);
    let h = rng.random_range(min_side..=1.0);
    let x0 = rng.random_range(0.0..=1.0 - w);
    let y0 = rng.random_range(0.0..=1.0 - h);
    BoundingBox::new(x0, y0, x0 + w, y0 + h).expect("generated box is valid")
}

/// Random tube with `len` samples drawn from `[0, horizon)` seconds.
pub fn random_tube(rng: &mut ChaCha8Rng, horizon: u32, len: usize) -> Tube {
    assert!(
        len as u32 <= horizon,
        "cannot place {len} samples in {horizon} seconds"
    );
    let mut timestamps: Vec<u32> = (0..horizon).collect();
    timestamps.shuffle(rng);
    timestamps.truncate(len);
    timestamps.sort_unstable();
    let boxes = (0..timestamps.len())
        .map(|_| random_box(rng, 0.05))
        .collect();
    Tube::new(TemporalSupport::from_seconds(timestamps), boxes).expect("generated tube is valid")
}

/// Random normalised interval set with `n` seed intervals in `[0, horizon]`.
pub fn random_intervals(rng: &mut ChaCha8Rng, horizon: f64, n: usize) -> IntervalSet {
    let pairs = (0..n).map(|_| {
        let start = rng.random_range(0.0..horizon * 0.9);
        let len = rng.random_range(0.1..horizon * 0.2);
        (start, (start + len).min(horizon))
    });
    IntervalSet::from_pairs(pairs).expect("generated intervals are valid")
}

/// Random per-query retrieval scores (each metric uniform in `[0, 1]`).
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> Vec<IntervalScores> {
    (0..n)
        .map(|_| {
            let iou = rng.random_range(0.0..=1.0);
            IntervalScores {
                iou,
                precision: (iou * rng.random_range(1.0..=1.5)).min(1.0),
                recall: (iou * rng.random_range(1.0..=1.5)).min(1.0),
            }
        })
        .collect()
}

/// `n` consecutive transcript segments of `words` words each, with a small
/// box track, jittered so matching is non-trivial.
pub fn random_segments(
    rng: &mut ChaCha8Rng,
    n: usize,
    words: usize,
    jitter: f64,
) -> Vec<TranscriptSegment> {
    const VOCAB: [&str; 12] = [
        "the", "captain", "said", "we", "sail", "at", "dawn", "toward", "harbor", "lights",
        "again", "slowly",
    ];
    (0..n)
        .map(|i| {
            let base = i as f64 * 4.0;
            let start = (base + rng.random_range(0.0..=jitter)).max(0.0);
            let end = start + rng.random_range(2.0..3.5);
            let text: Vec<&str> = (0..words)
                .map(|_| VOCAB[rng.random_range(0..VOCAB.len())])
                .collect();
            let boxes = (0..3)
                .map(|k| TimedBox {
                    timestamp_s: start + (end - start) * k as f64 / 3.0,
                    bbox: random_box(rng, 0.05),
                })
                .collect();
            TranscriptSegment::new(start, end, text.join(" "), boxes)
                .expect("generated segment is valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        let a = random_tube(&mut rng(7), 1800, 60);
        let b = random_tube(&mut rng(7), 1800, 60);
        assert_eq!(a, b);
        assert_eq!(a.len(), 60);

        let s1 = random_segments(&mut rng(11), 40, 8, 1.5);
        let s2 = random_segments(&mut rng(11), 40, 8, 1.5);
        assert_eq!(s1, s2);
        assert_eq!(s1.len(), 40);
    }

    #[test]
    fn generated_intervals_are_normalised() {
        let set = random_intervals(&mut rng(3), 600.0, 12);
        assert!(!set.is_empty());
        assert!(set.measure() > 0.0);
    }
}
