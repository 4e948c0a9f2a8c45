//! Criterion benchmarks for the scoring kernels on realistic input sizes.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use vgeval_bench::{
    random_box, random_intervals, random_scores, random_segments, random_tube, rng,
};
use vgeval_core::tr::MetricKind;
use vgeval_core::{plot, stg, tr};

fn bench_box_iou(c: &mut Criterion) {
    let mut r = rng(1);
    let pairs: Vec<_> = (0..256)
        .map(|_| (random_box(&mut r, 0.05), random_box(&mut r, 0.05)))
        .collect();
    c.bench_function("box_iou_256_pairs", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for (x, y) in &pairs {
                acc += black_box(x).iou(black_box(y));
            }
            acc
        })
    });
}

fn bench_tube_overlap(c: &mut Criterion) {
    // A half-hour video annotated at 1 Hz.
    let mut r = rng(2);
    let gt = random_tube(&mut r, 1800, 1700);
    let pred = random_tube(&mut r, 1800, 1500);
    c.bench_function("tube_overlap_1800s", |b| {
        b.iter(|| stg::overlap_stats(black_box(&pred), black_box(&gt)).unwrap())
    });
}

fn bench_interval_normalise(c: &mut Criterion) {
    let mut r = rng(3);
    let sets: Vec<_> = (0..64)
        .map(|_| random_intervals(&mut r, 3600.0, 24))
        .collect();
    c.bench_function("interval_scores_64_queries", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for w in sets.windows(2) {
                acc += tr::interval_scores(black_box(&w[0]), black_box(&w[1]))
                    .unwrap()
                    .iou;
            }
            acc
        })
    });
}

fn bench_threshold_curves(c: &mut Criterion) {
    let scores = random_scores(&mut rng(4), 1000);
    let values: Vec<f64> = scores.iter().map(|s| s.iou).collect();
    c.bench_function("threshold_curve_1000_queries", |b| {
        b.iter(|| tr::threshold_curve(black_box(&values), MetricKind::Iou).unwrap())
    });
    c.bench_function("tr_summary_1000_queries", |b| {
        b.iter(|| tr::summarize(black_box(&scores)).unwrap())
    });
}

fn bench_segment_matching(c: &mut Criterion) {
    // A feature-length episode's worth of dialogue turns.
    let gt = random_segments(&mut rng(5), 40, 8, 0.0);
    let pred = random_segments(&mut rng(6), 40, 8, 1.5);
    c.bench_function("match_segments_40x40", |b| {
        b.iter(|| plot::match_segments(black_box(&gt), black_box(&pred)))
    });
    c.bench_function("score_plot_query_40x40", |b| {
        b.iter(|| plot::score_plot_query(black_box(&gt), black_box(&pred)))
    });
}

fn bench_corpus_wer(c: &mut Criterion) {
    let reference = random_segments(&mut rng(7), 125, 8, 0.0);
    let hypothesis = random_segments(&mut rng(8), 125, 8, 0.5);
    let matching = plot::match_segments(&reference, &hypothesis);
    c.bench_function("corpus_wer_1000_words", |b| {
        b.iter(|| {
            plot::corpus_wer(
                black_box(&matching),
                black_box(&reference),
                black_box(&hypothesis),
            )
        })
    });
}

criterion_group!(
    kernels,
    bench_box_iou,
    bench_tube_overlap,
    bench_interval_normalise,
    bench_threshold_curves,
    bench_segment_matching,
    bench_corpus_wer
);
criterion_main!(kernels);
