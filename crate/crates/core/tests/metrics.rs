mod common;

use chunkgen_core::evaluator::{HistogramEmbedder, PoolEmbedder};
use chunkgen_core::metrics::{
    background_consistency, motion_smoothness, subject_consistency, temporal_flickering,
    VideoMetrics,
};
use chunkgen_core::tensor::{sample_standard_normal, Domain, Shape, VideoTensor};
use chunkgen_core::world::chunk_mean;
use chunkgen_core::Seed;
use common::default_setup;
use proptest::prelude::*;

/// 4x4 block means minus 0.5 for a 32x32x3 frame, unit-normalized.
fn oracle_pool(frame: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; 8 * 8 * 3];
    for cy in 0..8 {
        for cx in 0..8 {
            for ch in 0..3 {
                let mut s = 0.0;
                for y in cy * 4..cy * 4 + 4 {
                    for x in cx * 4..cx * 4 + 4 {
                        s += frame[(y * 32 + x) * 3 + ch];
                    }
                }
                v[(cy * 8 + cx) * 3 + ch] = s / 16.0 - 0.5;
            }
        }
    }
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn oracle_subject_consistency(video: &VideoTensor) -> f64 {
    let emb: Vec<Vec<f64>> = video.frame_iter().map(oracle_pool).collect();
    let cos: f64 = emb
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a * b).sum::<f64>())
        .sum();
    (cos / (emb.len() - 1) as f64 + 1.0) / 2.0
}

#[test]
fn subject_consistency_matches_hand_pooling() {
    let s = default_setup();
    for mode in &s.world.modes {
        let m = chunk_mean(&s.guide, mode, &s.world).unwrap();
        let got = subject_consistency(&m, &PoolEmbedder::default()).unwrap();
        assert!((got - oracle_subject_consistency(&m)).abs() < 1e-12);
    }
}

#[test]
fn clean_mode_metrics_are_pinned() {
    // Regression values for the default world's first mode mean.
    let s = default_setup();
    let m = chunk_mean(&s.guide, &s.world.modes[0], &s.world).unwrap();
    let v =
        VideoMetrics::compute(&m, &PoolEmbedder::default(), &HistogramEmbedder::default()).unwrap();
    let pinned = [
        0.9985455673881403,
        1.0,
        0.9929578306037492,
        0.9991683602702647,
    ];
    for (got, want) in v.values().iter().zip(pinned) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn artifact_mode_scores_below_its_clean_counterpart() {
    let s = default_setup();
    let clean = chunk_mean(&s.guide, &s.world.modes[0], &s.world).unwrap();
    let artifact = chunk_mean(&s.guide, &s.world.modes[3], &s.world).unwrap();
    assert_eq!(
        (s.world.modes[0].dy, s.world.modes[0].dx),
        (s.world.modes[3].dy, s.world.modes[3].dx)
    );
    let e = (PoolEmbedder::default(), HistogramEmbedder::default());
    let c = VideoMetrics::compute(&clean, &e.0, &e.1).unwrap();
    let a = VideoMetrics::compute(&artifact, &e.0, &e.1).unwrap();
    assert!(c.subject_consistency > a.subject_consistency);
    assert!(c.background_consistency > a.background_consistency);
    assert!(c.temporal_flickering > a.temporal_flickering);
    // the artifact ramp is linear in time, so interpolation hides it
    assert!(c.motion_smoothness >= a.motion_smoothness);
}

#[test]
fn translation_keeps_histograms() {
    let s = default_setup();
    for mode in s.world.modes.iter().filter(|m| m.is_clean()) {
        let m = chunk_mean(&s.guide, mode, &s.world).unwrap();
        let b = background_consistency(&m, &HistogramEmbedder::default()).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
    }
}

fn small_video(frames: usize, seed: u64) -> VideoTensor {
    let shape = Shape::new(frames, 6, 5, 3).unwrap();
    let n = sample_standard_normal(shape, Seed::new(seed, 0));
    let data = n.as_slice().iter().map(|v| 0.5 + 0.3 * v).collect();
    VideoTensor::new(shape, Domain::Pixel, data).unwrap()
}

fn reversed(v: &VideoTensor) -> VideoTensor {
    let mut data = Vec::new();
    for i in (0..v.frames()).rev() {
        data.extend_from_slice(v.frame(i));
    }
    VideoTensor::new(v.shape(), v.domain(), data).unwrap()
}

fn with_last_frame_repeated(v: &VideoTensor) -> VideoTensor {
    let mut data = v.as_slice().to_vec();
    data.extend_from_slice(v.frame(v.frames() - 1));
    VideoTensor::new(
        v.shape().frame_shape().with_frames(v.frames() + 1),
        v.domain(),
        data,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // A repeated last frame adds one perfect consecutive pair to each pairwise
    // mean. Motion smoothness gains a reconstructed frame only when the old
    // last index was odd.
    #[test]
    fn repeating_the_last_frame(frames in 3usize..9, seed in any::<u64>()) {
        let v = small_video(frames, seed);
        let w = with_last_frame_repeated(&v);
        let pool = PoolEmbedder::default();
        let hist = HistogramEmbedder::default();
        let pairs = (frames - 1) as f64;
        let grow = |old: f64| (old * pairs + 1.0) / (pairs + 1.0);
        prop_assert!((subject_consistency(&w, &pool).unwrap() - grow(subject_consistency(&v, &pool).unwrap())).abs() < 1e-12);
        prop_assert!((background_consistency(&w, &hist).unwrap() - grow(background_consistency(&v, &hist).unwrap())).abs() < 1e-12);
        prop_assert!((temporal_flickering(&w).unwrap() - grow(temporal_flickering(&v).unwrap())).abs() < 1e-12);

        let old = motion_smoothness(&v).unwrap();
        let new = motion_smoothness(&w).unwrap();
        let last = frames - 1;
        if last % 2 == 0 {
            prop_assert_eq!(new, old);
        } else {
            // frame `last` is now reconstructed from frames last-1 and last
            let odd_before = (frames - 1) / 2;
            let px = |x: f64| x.clamp(0.0, 1.0);
            let err: f64 = v.frame(last).iter().zip(v.frame(last - 1))
                .map(|(a, b)| (px(*a) - 0.5 * (px(*a) + px(*b))).abs())
                .sum::<f64>() / v.shape().frame_len() as f64;
            let expected = 1.0 - ((1.0 - old) * odd_before as f64 + err) / (odd_before + 1) as f64;
            prop_assert!((new - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_stay_in_unit_interval(frames in 3usize..9, seed in any::<u64>()) {
        let v = small_video(frames, seed);
        let m = VideoMetrics::compute(&v, &PoolEmbedder::default(), &HistogramEmbedder::default()).unwrap();
        for x in m.values() {
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn pairwise_metrics_ignore_time_direction(frames in 2usize..9, seed in any::<u64>()) {
        let v = small_video(frames, seed);
        let r = reversed(&v);
        let pool = PoolEmbedder::default();
        let hist = HistogramEmbedder::default();
        prop_assert!((subject_consistency(&v, &pool).unwrap() - subject_consistency(&r, &pool).unwrap()).abs() < 1e-12);
        prop_assert!((background_consistency(&v, &hist).unwrap() - background_consistency(&r, &hist).unwrap()).abs() < 1e-12);
        prop_assert!((temporal_flickering(&v).unwrap() - temporal_flickering(&r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn smoothness_is_one_on_linear_fades(frames in 3usize..12, a in 0.0f64..0.5, b in 0.0f64..0.5) {
        let shape = Shape::new(frames, 4, 4, 1).unwrap();
        let v = VideoTensor::from_fn(shape, Domain::Pixel, |f, y, x, _| {
            let t = f as f64 / (frames - 1) as f64;
            a + (b - a) * t + 0.01 * (y + x) as f64
        })
        .unwrap();
        prop_assert!((motion_smoothness(&v).unwrap() - 1.0).abs() < 1e-12);
    }
}
