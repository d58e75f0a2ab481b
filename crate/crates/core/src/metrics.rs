//! Video quality metrics and noise-variability statistics.
//!
//! Feature-based consistency metrics use analytic embedders in place of
//! learned feature networks, and motion smoothness reconstructs odd frames
//! by linear interpolation. All scores are mapped into [0, 1] with 1 best.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{cosine_similarity, embed_frames, Embedder, HistogramEmbedder};
use crate::tensor::VideoTensor;

pub const METRIC_NAMES: [&str; 4] = [
    "subject_consistency",
    "background_consistency",
    "temporal_flickering",
    "motion_smoothness",
];

fn need_frames(video: &VideoTensor, need: usize) -> Result<()> {
    if video.frames() < need {
        return Err(Error::TooFewFrames {
            need,
            found: video.frames(),
        });
    }
    Ok(())
}

fn consecutive_consistency(video: &VideoTensor, embedder: &dyn Embedder) -> Result<f64> {
    need_frames(video, 2)?;
    let emb = embed_frames(video, embedder);
    let mut total = 0.0;
    for pair in emb.windows(2) {
        total += cosine_similarity(&pair[0], &pair[1])?;
    }
    let mean = total / (emb.len() - 1) as f64;
    Ok(((mean + 1.0) / 2.0).clamp(0.0, 1.0))
}

/// Mean cosine similarity of consecutive frame embeddings, mapped to [0, 1].
pub fn subject_consistency(video: &VideoTensor, embedder: &dyn Embedder) -> Result<f64> {
    consecutive_consistency(video, embedder)
}

/// [`subject_consistency`] over intensity histograms.
pub fn background_consistency(video: &VideoTensor, embedder: &HistogramEmbedder) -> Result<f64> {
    consecutive_consistency(video, embedder)
}

/// One minus the mean absolute pixel change between consecutive frames.
pub fn temporal_flickering(video: &VideoTensor) -> Result<f64> {
    need_frames(video, 2)?;
    let mut total = 0.0;
    let mut prev: Option<&[f64]> = None;
    for f in video.frame_iter() {
        if let Some(p) = prev {
            total += p
                .iter()
                .zip(f)
                .map(|(a, b)| (b.clamp(0.0, 1.0) - a.clamp(0.0, 1.0)).abs())
                .sum::<f64>();
        }
        prev = Some(f);
    }
    let n = (video.frames() - 1) * video.shape().frame_len();
    Ok((1.0 - total / n as f64).clamp(0.0, 1.0))
}

/// Reconstructs each odd frame `i` with both neighbours present as the mean
/// of frames `i-1` and `i+1`; scores one minus the mean absolute error. A
/// trailing odd frame without a right neighbour is skipped.
pub fn motion_smoothness(video: &VideoTensor) -> Result<f64> {
    need_frames(video, 3)?;
    let mut total = 0.0;
    let mut count = 0usize;
    let px = |v: f64| v.clamp(0.0, 1.0);
    let mut i = 1;
    while i + 1 < video.frames() {
        let (a, mid, b) = (video.frame(i - 1), video.frame(i), video.frame(i + 1));
        for ((x, y), z) in a.iter().zip(mid).zip(b) {
            total += (px(*y) - 0.5 * (px(*x) + px(*z))).abs();
        }
        count += mid.len();
        i += 2;
    }
    Ok((1.0 - total / count as f64).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariabilityStats {
    pub min: f64,
    pub max: f64,
    pub range: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub fn variability_stats(scores: &[f64]) -> Result<VariabilityStats> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // Deviations are taken from the first score so that identical scores
    // give a spread of exactly zero.
    let n = scores.len() as f64;
    let shifted: Vec<f64> = scores.iter().map(|s| s - scores[0]).collect();
    let mean = shifted.iter().sum::<f64>() / n;
    let var = shifted.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    Ok(VariabilityStats {
        min,
        max,
        range: max - min,
        std: var.sqrt(),
    })
}

/// The four video metrics, in [`METRIC_NAMES`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub subject_consistency: f64,
    pub background_consistency: f64,
    pub temporal_flickering: f64,
    pub motion_smoothness: f64,
}

impl VideoMetrics {
    pub fn compute(
        video: &VideoTensor,
        subject: &dyn Embedder,
        background: &HistogramEmbedder,
    ) -> Result<Self> {
        Ok(Self {
            subject_consistency: subject_consistency(video, subject)?,
            background_consistency: background_consistency(video, background)?,
            temporal_flickering: temporal_flickering(video)?,
            motion_smoothness: motion_smoothness(video)?,
        })
    }

    pub fn values(&self) -> [f64; 4] {
        [
            self.subject_consistency,
            self.background_consistency,
            self.temporal_flickering,
            self.motion_smoothness,
        ]
    }
}
