//! Frame embeddings and the guide-similarity candidate score.
//!
//! A candidate chunk is scored by the worst (or average) cosine similarity
//! between any frame's embedding and the guide's embedding. Embeddings
//! are analytic: [`PoolEmbedder`] keeps coarse layout and discards pixel
//! detail, [`HistogramEmbedder`] keeps only per-channel intensity
//! distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Frame, FrameShape, VideoTensor};

/// Maps a frame to a unit vector of fixed dimension.
pub trait Embedder: Sync {
    fn dim(&self, shape: FrameShape) -> usize;

    /// `data` is one frame in `(row, column, channel)` order with pixel
    /// values in [0, 1].
    fn embed(&self, shape: FrameShape, data: &[f64]) -> Vec<f64>;

    fn embed_frame(&self, frame: &Frame) -> Vec<f64> {
        self.embed(frame.shape(), frame.as_slice())
    }
}

fn normalize_or_e1(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-8 {
        v.iter_mut().for_each(|x| *x = 0.0);
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Average-pools to a `grid x grid` layout per channel, centers on
/// `reference_level`, and L2-normalizes. A frame whose centered pooling
/// vanishes maps to the first basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolEmbedder {
    pub grid: usize,
    pub reference_level: f64,
}

impl Default for PoolEmbedder {
    fn default() -> Self {
        Self {
            grid: 8,
            reference_level: 0.5,
        }
    }
}

impl Embedder for PoolEmbedder {
    fn dim(&self, shape: FrameShape) -> usize {
        self.grid * self.grid * shape.channels
    }

    fn embed(&self, shape: FrameShape, data: &[f64]) -> Vec<f64> {
        let p = self.grid;
        let c = shape.channels;
        let mut sums = vec![0.0; p * p * c];
        let mut counts = vec![0usize; p * p];
        // Bin rows and columns so every pixel lands in exactly one cell even
        // when the grid does not divide the frame.
        for y in 0..shape.height {
            let by = y * p / shape.height;
            for x in 0..shape.width {
                let bx = x * p / shape.width;
                let cell = by * p + bx;
                counts[cell] += 1;
                let src = (y * shape.width + x) * c;
                for ch in 0..c {
                    sums[cell * c + ch] += data[src + ch];
                }
            }
        }
        let v = sums
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let n = counts[i / c];
                if n == 0 {
                    0.0
                } else {
                    s / n as f64 - self.reference_level
                }
            })
            .collect();
        normalize_or_e1(v)
    }
}

/// Per-channel intensity histogram, L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramEmbedder {
    pub bins: usize,
}

impl Default for HistogramEmbedder {
    fn default() -> Self {
        Self { bins: 16 }
    }
}

impl Embedder for HistogramEmbedder {
    fn dim(&self, shape: FrameShape) -> usize {
        self.bins * shape.channels
    }

    fn embed(&self, shape: FrameShape, data: &[f64]) -> Vec<f64> {
        let c = shape.channels;
        let mut hist = vec![0.0; self.bins * c];
        for (i, v) in data.iter().enumerate() {
            let b = ((v.clamp(0.0, 1.0) * self.bins as f64) as usize).min(self.bins - 1);
            hist[(i % c) * self.bins + b] += 1.0;
        }
        normalize_or_e1(hist)
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Min,
    Mean,
}

/// Embeds every frame of `video` after clamping to the pixel range.
pub fn embed_frames(video: &VideoTensor, embedder: &dyn Embedder) -> Vec<Vec<f64>> {
    let fs = video.shape().frame_shape();
    let mut buf = vec![0.0; fs.len()];
    video
        .frame_iter()
        .map(|f| {
            for (b, v) in buf.iter_mut().zip(f) {
                *b = v.clamp(0.0, 1.0);
            }
            embedder.embed(fs, &buf)
        })
        .collect()
}

/// Aggregated cosine similarity between each frame and the guide.
pub fn guide_similarity_score(
    video: &VideoTensor,
    guide: &Frame,
    embedder: &dyn Embedder,
    aggregator: Aggregator,
) -> Result<f64> {
    if video.frames() == 0 {
        return Err(Error::EmptyVideo);
    }
    if video.shape().frame_shape() != guide.shape() {
        return Err(Error::ShapeMismatch {
            expected: guide.shape().with_frames(video.frames()),
            found: video.shape(),
        });
    }
    let g = embedder.embed_frame(guide);
    let sims = embed_frames(video, embedder)
        .iter()
        .map(|e| cosine_similarity(&g, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(match aggregator {
        Aggregator::Min => sims.iter().cloned().fold(f64::INFINITY, f64::min),
        Aggregator::Mean => sims.iter().sum::<f64>() / sims.len() as f64,
    })
}

/// Scores a candidate chunk against its guide; higher is better.
pub trait CandidateScorer: Sync {
    fn score(&self, video: &VideoTensor, guide: &Frame) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GuideSimilarity {
    pub embedder: PoolEmbedder,
    pub aggregator: Aggregator,
}

impl CandidateScorer for GuideSimilarity {
    fn score(&self, video: &VideoTensor, guide: &Frame) -> Result<f64> {
        guide_similarity_score(video, guide, &self.embedder, self.aggregator)
    }
}

/// Gives every candidate the same score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantScorer(pub f64);

impl CandidateScorer for ConstantScorer {
    fn score(&self, _video: &VideoTensor, _guide: &Frame) -> Result<f64> {
        Ok(self.0)
    }
}
