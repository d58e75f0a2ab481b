//! Seeded synthetic guide images.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::Seed;
use crate::tensor::{Frame, FrameShape};

const RADIUS_MIN: f64 = 0.15;
const RADIUS_SPAN: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuideSpec {
    /// Soft coloured Gaussian blobs on a flat background, periodic in both
    /// axes.
    Blobs {
        seed: u64,
        count: usize,
    },
    /// Per-channel linear gradient with random direction.
    Gradient {
        seed: u64,
    },
    /// Checkerboard of `cell`-pixel squares between two random colours.
    Checkerboard {
        seed: u64,
        cell: usize,
    },
    Constant {
        value: f64,
    },
}

impl Default for GuideSpec {
    fn default() -> Self {
        GuideSpec::Blobs { seed: 1, count: 6 }
    }
}

impl GuideSpec {
    pub fn render(&self, shape: FrameShape) -> Result<Frame> {
        let (h, w) = (shape.height as f64, shape.width as f64);
        match *self {
            GuideSpec::Constant { value } => Frame::filled(shape, value.clamp(0.0, 1.0)),
            GuideSpec::Gradient { seed } => {
                let mut rng = Seed::new(seed, 0).rng();
                let coeffs: Vec<(f64, f64, f64)> = (0..shape.channels)
                    .map(|_| {
                        (
                            rng.next_open01() * 2.0 - 1.0,
                            rng.next_open01() * 2.0 - 1.0,
                            rng.next_open01(),
                        )
                    })
                    .collect();
                Frame::from_fn(shape, |y, x, c| {
                    let (a, b, o) = coeffs[c];
                    (o + 0.5 * (a * y as f64 / h + b * x as f64 / w)).clamp(0.0, 1.0)
                })
            }
            GuideSpec::Checkerboard { seed, cell } => {
                let mut rng = Seed::new(seed, 0).rng();
                let cell = cell.max(1);
                let colors: Vec<[f64; 2]> = (0..shape.channels)
                    .map(|_| [rng.next_open01(), rng.next_open01()])
                    .collect();
                Frame::from_fn(shape, |y, x, c| colors[c][(y / cell + x / cell) % 2])
            }
            GuideSpec::Blobs { seed, count } => {
                let mut rng = Seed::new(seed, 0).rng();
                let base: Vec<f64> = (0..shape.channels)
                    .map(|_| 0.3 + 0.4 * rng.next_open01())
                    .collect();
                struct Blob {
                    cy: f64,
                    cx: f64,
                    radius: f64,
                    color: Vec<f64>,
                }
                let blobs: Vec<Blob> = (0..count)
                    .map(|_| Blob {
                        cy: rng.next_open01() * h,
                        cx: rng.next_open01() * w,
                        radius: (RADIUS_MIN + RADIUS_SPAN * rng.next_open01()) * h.min(w),
                        color: (0..shape.channels).map(|_| rng.next_open01()).collect(),
                    })
                    .collect();
                Frame::from_fn(shape, |y, x, c| {
                    let mut v = base[c];
                    for b in &blobs {
                        // toroidal distance keeps the pattern seamless under wraparound
                        let dy = (y as f64 - b.cy).abs();
                        let dy = dy.min(h - dy);
                        let dx = (x as f64 - b.cx).abs();
                        let dx = dx.min(w - dx);
                        let g = (-(dy * dy + dx * dx) / (2.0 * b.radius * b.radius)).exp();
                        v = v * (1.0 - g) + b.color[c] * g;
                    }
                    v.clamp(0.0, 1.0)
                })
            }
        }
    }
}
