//! Autoregressive chunk-by-chunk video generation with k-step initial-noise
//! search, over an analytic Gaussian-mixture "toy world" whose optimal
//! denoiser is known in closed form.
//!
//! Modules, bottom up:
//! - [`rng`], [`tensor`], [`cbcv`]: seeded randomness, video tensors, raw dumps
//! - [`schedule`]: variance schedules and the forward process
//! - [`world`]: the mixture world and its exact noise predictor
//! - [`sampler`]: DDIM / ancestral reverse sampling
//! - [`guide`]: seeded synthetic guide images
//! - [`evaluator`]: embeddings and the guide-similarity score
//! - [`search`]: naive, k-step, and brute-force chunk generation
//! - [`metrics`]: consistency, flickering, smoothness, variability

pub mod cbcv;
pub mod error;
pub mod evaluator;
pub mod guide;
pub mod metrics;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod search;
pub mod tensor;
pub mod world;

pub use error::{Error, Result};
pub use rng::Seed;
pub use tensor::{Domain, Frame, FrameShape, Shape, VideoTensor};
