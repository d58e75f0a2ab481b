//! Video tensors, frames, and the Gaussian noise source.
//!
//! Layout is row-major `(frame, row, column, channel)` throughout, matching
//! the order frames are dumped to disk.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrameShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl FrameShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidShape);
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_frames(self, frames: usize) -> Shape {
        Shape {
            frames,
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize) -> Result<Self> {
        if frames == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidShape);
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
        })
    }

    pub fn len(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn frame_shape(&self) -> FrameShape {
        FrameShape {
            height: self.height,
            width: self.width,
            channels: self.channels,
        }
    }

    pub fn index(&self, frame: usize, row: usize, col: usize, channel: usize) -> usize {
        ((frame * self.height + row) * self.width + col) * self.channels + channel
    }
}

/// Which value domain a tensor lives in. Pixel tensors are nominally in
/// [0, 1]; latent tensors (noise, intermediate samples) are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    #[default]
    Latent,
    Pixel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    shape: Shape,
    domain: Domain,
    data: Vec<f64>,
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

fn checksum_f64(data: &[f64]) -> String {
    let mut hasher = Sha256::new();
    for v in data {
        hasher.update(v.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

impl VideoTensor {
    pub fn new(shape: Shape, domain: Domain, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                expected: shape.len(),
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            shape,
            domain,
            data,
        })
    }

    pub fn zeros(shape: Shape, domain: Domain) -> Self {
        Self::filled(shape, domain, 0.0)
    }

    pub fn filled(shape: Shape, domain: Domain, value: f64) -> Self {
        assert!(value.is_finite());
        Self {
            shape,
            domain,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(
        shape: Shape,
        domain: Domain,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for fi in 0..shape.frames {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    for c in 0..shape.channels {
                        data.push(f(fi, y, x, c));
                    }
                }
            }
        }
        Self::new(shape, domain, data)
    }

    /// Crate-internal constructor for arithmetic results whose finiteness
    /// follows from finite inputs.
    pub(crate) fn from_parts(shape: Shape, domain: Domain, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self {
            shape,
            domain,
            data,
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn frames(&self) -> usize {
        self.shape.frames
    }

    pub fn frame(&self, index: usize) -> &[f64] {
        let n = self.shape.frame_len();
        &self.data[index * n..(index + 1) * n]
    }

    pub fn frame_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.shape.frame_len())
    }

    pub fn get(&self, frame: usize, row: usize, col: usize, channel: usize) -> f64 {
        self.data[self.shape.index(frame, row, col, channel)]
    }

    /// Copy of frames `start..end`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.shape.frames {
            return Err(Error::InvalidConfig(format!(
                "frame range {start}..{end} outside 0..{}",
                self.shape.frames
            )));
        }
        let n = self.shape.frame_len();
        Ok(Self {
            shape: Shape {
                frames: end - start,
                ..self.shape
            },
            domain: self.domain,
            data: self.data[start * n..end * n].to_vec(),
        })
    }

    pub fn ensure_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                expected: self.shape,
                found: other.shape,
            });
        }
        Ok(())
    }

    /// `a * self + b * other`, elementwise.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::from_parts(self.shape, self.domain, data))
    }

    pub fn scale(&self, a: f64) -> Self {
        Self::from_parts(
            self.shape,
            self.domain,
            self.data.iter().map(|x| a * x).collect(),
        )
    }

    pub fn squared_distance(&self, other: &Self) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(squared_distance(&self.data, &other.data))
    }

    pub fn clamped(&self) -> Self {
        Self::from_parts(
            self.shape,
            Domain::Pixel,
            self.data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
    }

    /// SHA-256 over the little-endian bytes of every element.
    pub fn checksum(&self) -> String {
        checksum_f64(&self.data)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A single image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    shape: FrameShape,
    data: Vec<f64>,
}

impl Frame {
    pub fn new(shape: FrameShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                expected: shape.len(),
                found: data.len(),
            });
        }
        check_finite(&data)?;
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::PixelRange {
                index: i,
                value: data[i],
            });
        }
        Ok(Self { shape, data })
    }

    /// Builds a frame from arbitrary finite values, clamping into [0, 1].
    pub fn from_clamped(shape: FrameShape, data: &[f64]) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DataLength {
                expected: shape.len(),
                found: data.len(),
            });
        }
        check_finite(data)?;
        Ok(Self {
            shape,
            data: data.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        })
    }

    pub fn filled(shape: FrameShape, value: f64) -> Result<Self> {
        Self::new(shape, vec![value; shape.len()])
    }

    pub fn from_fn(
        shape: FrameShape,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for y in 0..shape.height {
            for x in 0..shape.width {
                for c in 0..shape.channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> FrameShape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.shape.width + col) * self.shape.channels + channel]
    }

    pub fn checksum(&self) -> String {
        checksum_f64(&self.data)
    }

    /// The frame as a one-frame pixel-domain video.
    pub fn to_video(&self) -> VideoTensor {
        VideoTensor::from_parts(self.shape.with_frames(1), Domain::Pixel, self.data.clone())
    }
}

/// Joins chunks along the frame axis.
pub fn concat_chunks(chunks: &[VideoTensor]) -> Result<VideoTensor> {
    let first = chunks.first().ok_or(Error::NoChunks)?;
    let fs = first.shape.frame_shape();
    let mut frames = 0;
    for c in chunks {
        if c.shape.frame_shape() != fs {
            return Err(Error::ShapeMismatch {
                expected: first.shape,
                found: c.shape,
            });
        }
        frames += c.shape.frames;
    }
    let shape = fs.with_frames(frames);
    let mut data = Vec::with_capacity(shape.len());
    for c in chunks {
        data.extend_from_slice(&c.data);
    }
    Ok(VideoTensor::from_parts(shape, first.domain, data))
}

/// Copy of the final frame, clamped into the pixel range so it can serve
/// as the next guide image.
pub fn last_frame(video: &VideoTensor) -> Frame {
    let f = video.frame(video.frames() - 1);
    Frame {
        shape: video.shape.frame_shape(),
        data: f.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    }
}

/// Independent standard normals, a pure function of `(shape, seed)`.
pub fn sample_standard_normal(shape: Shape, seed: Seed) -> VideoTensor {
    let mut rng = seed.rng();
    let data = (0..shape.len()).map(|_| rng.next_normal()).collect();
    VideoTensor::from_parts(shape, Domain::Latent, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(f: usize, h: usize, w: usize, c: usize) -> Shape {
        Shape::new(f, h, w, c).unwrap()
    }

    #[test]
    fn concat_two_chunks() {
        let a = VideoTensor::filled(shape(16, 32, 32, 3), Domain::Pixel, 0.1);
        let b = VideoTensor::filled(shape(16, 32, 32, 3), Domain::Pixel, 0.9);
        let v = concat_chunks(&[a.clone(), b]).unwrap();
        assert_eq!(v.frames(), 32);
        assert_eq!(v.frame(15)[0], 0.1);
        assert_eq!(v.frame(16)[0], 0.9);
        assert_eq!(concat_chunks(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn concat_errors() {
        assert_eq!(concat_chunks(&[]), Err(Error::NoChunks));
        let a = VideoTensor::zeros(shape(16, 32, 32, 3), Domain::Pixel);
        let b = VideoTensor::zeros(shape(16, 16, 16, 3), Domain::Pixel);
        let err = concat_chunks(&[a, b]).unwrap_err();
        assert!(err.to_string().starts_with("shape mismatch"));
    }

    #[test]
    fn last_frame_reads_final_frame() {
        let s = shape(16, 4, 4, 3);
        let v = VideoTensor::from_fn(
            s,
            Domain::Pixel,
            |f, _, _, _| {
                if f == 15 {
                    0.5
                } else {
                    0.0
                }
            },
        )
        .unwrap();
        let mut g = last_frame(&v);
        assert!(g.as_slice().iter().all(|&x| x == 0.5));
        g.as_mut_slice()[0] = 1.0;
        assert_eq!(v.get(15, 0, 0, 0), 0.5);

        let one = VideoTensor::filled(shape(1, 2, 2, 1), Domain::Pixel, 0.25);
        assert_eq!(last_frame(&one).as_slice(), one.as_slice());
    }

    #[test]
    fn last_frame_clamps_latent_values() {
        let v = VideoTensor::new(shape(1, 1, 2, 1), Domain::Latent, vec![-0.3, 1.7]).unwrap();
        assert_eq!(last_frame(&v).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn normals_are_deterministic_and_stream_separated() {
        let s = shape(2, 3, 3, 1);
        let a = sample_standard_normal(s, Seed::new(5, 1));
        let b = sample_standard_normal(s, Seed::new(5, 1));
        let c = sample_standard_normal(s, Seed::new(5, 2));
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn normal_moments_on_a_chunk() {
        // 49,152 draws: 4 sigma of the mean is 4/sqrt(n) ~ 0.018, of the
        // std ~ 4/sqrt(2n) ~ 0.0128.
        let s = shape(16, 32, 32, 3);
        for seed in 0..5 {
            let v = sample_standard_normal(s, Seed::new(seed, 0));
            let n = v.as_slice().len() as f64;
            let mean = v.as_slice().iter().sum::<f64>() / n;
            let var = v.as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() <= 0.02, "mean {mean}");
            assert!((0.99..=1.01).contains(&var.sqrt()), "std {}", var.sqrt());
        }
    }

    #[test]
    fn rejects_bad_data() {
        let s = shape(1, 1, 1, 2);
        assert!(matches!(
            VideoTensor::new(s, Domain::Latent, vec![0.0]),
            Err(Error::DataLength { .. })
        ));
        assert_eq!(
            VideoTensor::new(s, Domain::Latent, vec![0.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
        assert!(Frame::new(FrameShape::new(1, 1, 1).unwrap(), vec![1.5]).is_err());
        assert_eq!(Shape::new(0, 1, 1, 1), Err(Error::InvalidShape));
    }
}
