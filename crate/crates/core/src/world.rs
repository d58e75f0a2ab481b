//! The guide-conditioned Gaussian-mixture "drifting pattern" world.
//!
//! Given a guide frame, each [`MotionMode`] defines a mean chunk: the guide
//! translated toroidally by a fixed per-frame displacement, optionally with
//! a growing artifact pattern added. Data are the mixture
//! `sum_j w_j N(mu_j, sigma_data^2 I)`, whose noised marginals are again
//! Gaussian mixtures, so the optimal noise predictor is available in closed
//! form.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::schedule::NoiseSchedule;
use crate::tensor::{
    sample_standard_normal, squared_distance, Domain, Frame, FrameShape, Shape, VideoTensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    Clean,
    Artifact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionMode {
    pub dy: i64,
    pub dx: i64,
    pub artifact_amplitude: f64,
    pub weight: f64,
    pub label: ModeLabel,
}

impl MotionMode {
    pub fn clean(dy: i64, dx: i64, weight: f64) -> Self {
        Self {
            dy,
            dx,
            artifact_amplitude: 0.0,
            weight,
            label: ModeLabel::Clean,
        }
    }

    pub fn artifact(dy: i64, dx: i64, amplitude: f64, weight: f64) -> Self {
        Self {
            dy,
            dx,
            artifact_amplitude: amplitude,
            weight,
            label: ModeLabel::Artifact,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.label == ModeLabel::Clean
    }
}

/// Fixed pattern added by artifact modes, values in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactPattern {
    /// ±1 checkerboard in channel 0 and a vertical ramp from -1 (top) to
    /// +1 (bottom) in channel 2; other channels zero.
    CheckerboardRamp,
    Explicit {
        data: Vec<f64>,
    },
}

impl ArtifactPattern {
    pub fn materialize(&self, shape: FrameShape) -> Result<Vec<f64>> {
        match self {
            ArtifactPattern::CheckerboardRamp => {
                let mut out = Vec::with_capacity(shape.len());
                for y in 0..shape.height {
                    for x in 0..shape.width {
                        for c in 0..shape.channels {
                            out.push(match c {
                                0 => {
                                    if (x + y) % 2 == 0 {
                                        1.0
                                    } else {
                                        -1.0
                                    }
                                }
                                2 if shape.height > 1 => {
                                    2.0 * y as f64 / (shape.height - 1) as f64 - 1.0
                                }
                                _ => 0.0,
                            });
                        }
                    }
                }
                Ok(out)
            }
            ArtifactPattern::Explicit { data } => {
                if data.len() != shape.len() {
                    return Err(Error::InvalidConfig(format!(
                        "artifact pattern has {} values, frame needs {}",
                        data.len(),
                        shape.len()
                    )));
                }
                if data.iter().any(|v| !(-1.0..=1.0).contains(v)) {
                    return Err(Error::InvalidConfig(
                        "artifact pattern values must lie in [-1, 1]".into(),
                    ));
                }
                Ok(data.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldSpec {
    pub modes: Vec<MotionMode>,
    pub sigma_data: f64,
    pub chunk_len: usize,
    pub frame_shape: FrameShape,
    pub artifact_pattern: ArtifactPattern,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            modes: vec![
                MotionMode::clean(0, 1, 0.3),
                MotionMode::clean(1, 0, 0.3),
                MotionMode::clean(1, 1, 0.2),
                MotionMode::artifact(0, 1, 0.35, 0.2),
            ],
            sigma_data: 0.05,
            chunk_len: 16,
            frame_shape: FrameShape {
                height: 32,
                width: 32,
                channels: 3,
            },
            artifact_pattern: ArtifactPattern::CheckerboardRamp,
        }
    }
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.modes.is_empty() {
            return bad("world needs at least one mode");
        }
        for (i, m) in self.modes.iter().enumerate() {
            if !(m.weight > 0.0 && m.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "mode {i}: weight must be > 0"
                )));
            }
            if !(m.artifact_amplitude >= 0.0 && m.artifact_amplitude.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "mode {i}: artifact_amplitude must be >= 0"
                )));
            }
            if (m.label == ModeLabel::Artifact) != (m.artifact_amplitude > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "mode {i}: label must be artifact iff artifact_amplitude > 0"
                )));
            }
        }
        if !(self.sigma_data > 0.0 && self.sigma_data.is_finite()) {
            return bad("sigma_data must be > 0");
        }
        if self.chunk_len < 2 {
            return bad("chunk_len must be at least 2");
        }
        FrameShape::new(
            self.frame_shape.height,
            self.frame_shape.width,
            self.frame_shape.channels,
        )?;
        self.artifact_pattern.materialize(self.frame_shape)?;
        Ok(())
    }

    pub fn chunk_shape(&self) -> Shape {
        self.frame_shape.with_frames(self.chunk_len)
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        let total: f64 = self.modes.iter().map(|m| m.weight).sum();
        self.modes.iter().map(|m| m.weight / total).collect()
    }

    fn check_guide(&self, guide: &Frame) -> Result<()> {
        if guide.shape() != self.frame_shape {
            return Err(Error::ShapeMismatch {
                expected: self.frame_shape.with_frames(1),
                found: guide.shape().with_frames(1),
            });
        }
        Ok(())
    }

    fn check_chunk(&self, x: &VideoTensor) -> Result<()> {
        if x.shape() != self.chunk_shape() {
            return Err(Error::ShapeMismatch {
                expected: self.chunk_shape(),
                found: x.shape(),
            });
        }
        Ok(())
    }

    /// Mean chunks of every mode for one guide.
    pub fn mode_means(&self, guide: &Frame) -> Result<Vec<VideoTensor>> {
        let pattern = self.artifact_pattern.materialize(self.frame_shape)?;
        self.modes
            .iter()
            .map(|m| chunk_mean_with_pattern(guide, m, self, &pattern))
            .collect()
    }
}

/// Frame `i` is the guide translated by `(i*dy, i*dx)` with wraparound,
/// plus `artifact_amplitude * i/(L-1) * pattern`, clamped to [0, 1].
pub fn chunk_mean(guide: &Frame, mode: &MotionMode, world: &WorldSpec) -> Result<VideoTensor> {
    let pattern = world.artifact_pattern.materialize(world.frame_shape)?;
    chunk_mean_with_pattern(guide, mode, world, &pattern)
}

fn chunk_mean_with_pattern(
    guide: &Frame,
    mode: &MotionMode,
    world: &WorldSpec,
    pattern: &[f64],
) -> Result<VideoTensor> {
    world.check_guide(guide)?;
    let fs = world.frame_shape;
    let (h, w, c) = (fs.height as i64, fs.width as i64, fs.channels);
    let len = world.chunk_len;
    let shape = world.chunk_shape();
    let g = guide.as_slice();
    let mut data = Vec::with_capacity(shape.len());
    for i in 0..len {
        let ramp = mode.artifact_amplitude * i as f64 / (len - 1) as f64;
        let oy = i as i64 * mode.dy;
        let ox = i as i64 * mode.dx;
        for y in 0..h {
            let sy = (y - oy).rem_euclid(h) as usize;
            for x in 0..w {
                let sx = (x - ox).rem_euclid(w) as usize;
                let src = (sy * fs.width + sx) * c;
                let dst = (y as usize * fs.width + x as usize) * c;
                for ch in 0..c {
                    let v = g[src + ch] + ramp * pattern[dst + ch];
                    data.push(v.clamp(0.0, 1.0));
                }
            }
        }
    }
    Ok(VideoTensor::from_parts(shape, Domain::Pixel, data))
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    for l in logits.iter_mut() {
        *l /= total;
    }
}

/// `||z - a*mu||^2`, accumulated in eight interleaved partial sums.
fn scaled_squared_distance(z: &[f64], a: f64, mu: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let mut zc = z.chunks_exact(8);
    let mut mc = mu.chunks_exact(8);
    for (zs, ms) in (&mut zc).zip(&mut mc) {
        for k in 0..8 {
            let d = zs[k] - a * ms[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (zi, mi) in zc.remainder().iter().zip(mc.remainder()) {
        let d = zi - a * mi;
        tail += d * d;
    }
    acc.iter().sum::<f64>() + tail
}

fn responsibilities_from_means(
    z_t: &VideoTensor,
    alpha_bar: f64,
    means: &[VideoTensor],
    world: &WorldSpec,
) -> Vec<f64> {
    let a = alpha_bar.sqrt();
    let s2 = alpha_bar * world.sigma_data * world.sigma_data + (1.0 - alpha_bar);
    let z = z_t.as_slice();
    let mut logits: Vec<f64> = world
        .normalized_weights()
        .iter()
        .zip(means)
        .map(|(w, mu)| w.ln() - scaled_squared_distance(z, a, mu.as_slice()) / (2.0 * s2))
        .collect();
    softmax_in_place(&mut logits);
    logits
}

/// Posterior mode probabilities of the noised mixture at timestep `t`.
pub fn responsibilities(
    z_t: &VideoTensor,
    t: usize,
    guide: &Frame,
    world: &WorldSpec,
    schedule: &NoiseSchedule,
) -> Result<Vec<f64>> {
    schedule.check_timestep(t)?;
    world.check_chunk(z_t)?;
    let means = world.mode_means(guide)?;
    Ok(responsibilities_from_means(
        z_t,
        schedule.alpha_bar(t),
        &means,
        world,
    ))
}

/// Draws a mode by weight, then a Gaussian sample around its mean.
pub fn sample_data_oracle(
    guide: &Frame,
    world: &WorldSpec,
    seed: Seed,
) -> Result<(VideoTensor, usize)> {
    let weights = world.normalized_weights();
    let u = seed.rng().next_open01();
    let mut acc = 0.0;
    let mut index = weights.len() - 1;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            index = j;
            break;
        }
    }
    let mean = chunk_mean(guide, &world.modes[index], world)?;
    let eta = sample_standard_normal(world.chunk_shape(), seed.child(0));
    let x = mean
        .axpby(1.0, &eta, world.sigma_data)?
        .with_domain(Domain::Pixel);
    Ok((x, index))
}

fn nearest_mean(x: &VideoTensor, means: &[VideoTensor]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, mu) in means.iter().enumerate() {
        let d = squared_distance(x.as_slice(), mu.as_slice());
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

/// Index of the nearest mode mean; ties go to the lowest index.
pub fn classify_mode(x: &VideoTensor, guide: &Frame, world: &WorldSpec) -> Result<usize> {
    world.check_chunk(x)?;
    let means = world.mode_means(guide)?;
    Ok(nearest_mean(x, &means))
}

/// A noise predictor `eps(z_t, t, guide)`.
///
/// Implementations must be deterministic and return finite output for
/// finite input. They are shared across threads during candidate search.
pub trait Denoiser: Sync {
    fn predict_eps(&self, z_t: &VideoTensor, t: usize, guide: &Frame) -> Result<VideoTensor>;

    /// Unconditional prediction for classifier-free guidance, if the model
    /// has one.
    fn predict_eps_uncond(&self, _z_t: &VideoTensor, _t: usize) -> Option<Result<VideoTensor>> {
        None
    }

    /// Diagnostic mode label for a generated chunk, if the model knows its
    /// own data distribution.
    fn classify(&self, _chunk: &VideoTensor, _guide: &Frame) -> Option<usize> {
        None
    }
}

/// Everything the analytic predictor computes for one call.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub eps: VideoTensor,
    pub x0: VideoTensor,
    pub responsibilities: Vec<f64>,
}

const MEAN_CACHE_SLOTS: usize = 4;

type MeanCache = Mutex<Vec<(Frame, Arc<Vec<VideoTensor>>)>>;

/// The exact optimal noise predictor of a [`WorldSpec`] under a schedule.
///
/// Mode means are memoized per guide; the cache never changes results.
#[derive(Debug)]
pub struct ToyDenoiser {
    world: WorldSpec,
    schedule: NoiseSchedule,
    means: MeanCache,
}

impl Clone for ToyDenoiser {
    fn clone(&self) -> Self {
        Self {
            world: self.world.clone(),
            schedule: self.schedule.clone(),
            means: Mutex::new(Vec::new()),
        }
    }
}

impl ToyDenoiser {
    pub fn new(world: WorldSpec, schedule: NoiseSchedule) -> Result<Self> {
        world.validate()?;
        Ok(Self {
            world,
            schedule,
            means: Mutex::new(Vec::new()),
        })
    }

    fn cached_means(&self, guide: &Frame) -> Result<Arc<Vec<VideoTensor>>> {
        let mut cache = self.means.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(pos) = cache.iter().position(|(g, _)| g == guide) {
            let hit = cache.remove(pos);
            let means = hit.1.clone();
            cache.push(hit);
            return Ok(means);
        }
        let means = Arc::new(self.world.mode_means(guide)?);
        if cache.len() == MEAN_CACHE_SLOTS {
            cache.remove(0);
        }
        cache.push((guide.clone(), means.clone()));
        Ok(means)
    }

    pub fn world(&self) -> &WorldSpec {
        &self.world
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn predict(&self, z_t: &VideoTensor, t: usize, guide: &Frame) -> Result<Prediction> {
        self.schedule.check_timestep(t)?;
        self.world.check_chunk(z_t)?;
        let means = self.cached_means(guide)?;
        let ab = self.schedule.alpha_bar(t);
        let a = ab.sqrt();
        let sigma2 = self.world.sigma_data * self.world.sigma_data;
        let s2 = ab * sigma2 + (1.0 - ab);
        let r = responsibilities_from_means(z_t, ab, &means, &self.world);

        // x0 = sum_j r_j [mu_j + (a sigma^2 / s^2)(z - a mu_j)]
        //    = mbar + (a sigma^2 / s^2)(z - a mbar),  mbar = sum_j r_j mu_j
        let n = z_t.shape().len();
        let mut mbar = vec![0.0; n];
        for (rj, mu) in r.iter().zip(means.iter()) {
            if *rj == 0.0 {
                continue;
            }
            for (m, v) in mbar.iter_mut().zip(mu.as_slice()) {
                *m += rj * v;
            }
        }
        let gain = a * sigma2 / s2;
        let inv_noise = 1.0 / (1.0 - ab).sqrt();
        let mut x0 = mbar;
        let mut eps = vec![0.0; n];
        for ((z, x), e) in z_t.as_slice().iter().zip(x0.iter_mut()).zip(eps.iter_mut()) {
            *x += gain * (z - a * *x);
            *e = (z - a * *x) * inv_noise;
        }
        let shape = z_t.shape();
        Ok(Prediction {
            eps: VideoTensor::from_parts(shape, Domain::Latent, eps),
            x0: VideoTensor::from_parts(shape, Domain::Pixel, x0),
            responsibilities: r,
        })
    }
}

impl Denoiser for ToyDenoiser {
    fn predict_eps(&self, z_t: &VideoTensor, t: usize, guide: &Frame) -> Result<VideoTensor> {
        Ok(self.predict(z_t, t, guide)?.eps)
    }

    fn classify(&self, chunk: &VideoTensor, guide: &Frame) -> Option<usize> {
        self.world.check_chunk(chunk).ok()?;
        Some(nearest_mean(chunk, &self.cached_means(guide).ok()?))
    }
}

/// Wraps a denoiser and counts `predict_eps` calls.
#[derive(Debug)]
pub struct CountingDenoiser<D> {
    inner: D,
    calls: AtomicU64,
}

impl<D: Denoiser> CountingDenoiser<D> {
    pub fn new(inner: D) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }
}

impl<D: Denoiser> Denoiser for CountingDenoiser<D> {
    fn predict_eps(&self, z_t: &VideoTensor, t: usize, guide: &Frame) -> Result<VideoTensor> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.predict_eps(z_t, t, guide)
    }

    fn predict_eps_uncond(&self, z_t: &VideoTensor, t: usize) -> Option<Result<VideoTensor>> {
        self.inner.predict_eps_uncond(z_t, t)
    }

    fn classify(&self, chunk: &VideoTensor, guide: &Frame) -> Option<usize> {
        self.inner.classify(chunk, guide)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict_eps(&self, z_t: &VideoTensor, t: usize, guide: &Frame) -> Result<VideoTensor> {
        (**self).predict_eps(z_t, t, guide)
    }

    fn predict_eps_uncond(&self, z_t: &VideoTensor, t: usize) -> Option<Result<VideoTensor>> {
        (**self).predict_eps_uncond(z_t, t)
    }

    fn classify(&self, chunk: &VideoTensor, guide: &Frame) -> Option<usize> {
        (**self).classify(chunk, guide)
    }
}
