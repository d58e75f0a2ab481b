//! Variance schedules and the forward (noising) process.
//!
//! Timesteps are 0-based: `alpha_bars[t]` is the signal retention after
//! `t + 1` noising steps, so the most-noised level is `T - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::VideoTensor;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    sqrt_alpha_bars: Vec<f64>,
    sqrt_one_minus_alpha_bars: Vec<f64>,
    conforming: bool,
}

/// Parameters of a linear beta schedule, as stored in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearScheduleParams {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for LinearScheduleParams {
    fn default() -> Self {
        Self {
            timesteps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

impl LinearScheduleParams {
    pub fn build(&self) -> Result<NoiseSchedule> {
        make_linear_schedule(self.timesteps, self.beta_start, self.beta_end)
    }
}

/// How far the most-noised training distribution sits from a pure Gaussian:
/// at `T - 1` the noisy latent is `sqrt_alpha_bar_t * z + sqrt(1 - alpha_bar_t) * eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalStats {
    /// Factor shrinking the data mean.
    pub sqrt_alpha_bar_t: f64,
    /// Coefficient with which clean data leaks into the terminal latent.
    pub residual_mean_scale: f64,
    /// Terminal noise variance.
    pub one_minus_alpha_bar_t: f64,
}

impl NoiseSchedule {
    /// Builds a schedule from explicit betas. Every beta must lie in (0, 1);
    /// schedules that are not strictly increasing are accepted but flagged
    /// as non-conforming.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() || betas.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(Error::InvalidBetaRange);
        }
        let conforming = betas.windows(2).all(|w| w[0] < w[1]);
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(alphas.len());
        let mut acc = 1.0;
        for a in &alphas {
            acc *= a;
            alpha_bars.push(acc);
        }
        let sqrt_alpha_bars = alpha_bars.iter().map(|a| a.sqrt()).collect();
        let sqrt_one_minus_alpha_bars = alpha_bars.iter().map(|a| (1.0 - a).sqrt()).collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
            sqrt_alpha_bars,
            sqrt_one_minus_alpha_bars,
            conforming,
        })
    }

    pub fn num_timesteps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn sqrt_alpha_bars(&self) -> &[f64] {
        &self.sqrt_alpha_bars
    }

    pub fn sqrt_one_minus_alpha_bars(&self) -> &[f64] {
        &self.sqrt_one_minus_alpha_bars
    }

    /// False when the betas are not strictly increasing.
    pub fn is_conforming(&self) -> bool {
        self.conforming
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t >= self.num_timesteps() {
            return Err(Error::TimestepOutOfRange {
                t,
                max: self.num_timesteps(),
            });
        }
        Ok(())
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t]
    }

    /// Evenly spaced descending timesteps over `[0, T-1]`, both ends
    /// included, rounded half away from zero.
    pub fn timestep_grid(&self, num_steps: usize) -> Result<Vec<usize>> {
        let t_max = self.num_timesteps();
        if num_steps == 0 || num_steps > t_max {
            return Err(Error::StepsOutOfRange {
                steps: num_steps,
                max: t_max,
            });
        }
        if num_steps == 1 {
            return Ok(vec![t_max - 1]);
        }
        let den = num_steps - 1;
        let mut grid: Vec<usize> = (0..num_steps)
            .map(|i| {
                // round((T-1)(den-i)/den) in exact integer arithmetic
                let num = (t_max - 1) * (den - i);
                (2 * num + den) / (2 * den)
            })
            .collect();
        grid.dedup();
        Ok(grid)
    }

    /// `z_t = sqrt(alpha_bar_t) z0 + sqrt(1 - alpha_bar_t) eps`.
    pub fn q_sample(&self, z0: &VideoTensor, t: usize, eps: &VideoTensor) -> Result<VideoTensor> {
        self.check_timestep(t)?;
        z0.axpby(
            self.sqrt_alpha_bars[t],
            eps,
            self.sqrt_one_minus_alpha_bars[t],
        )
    }

    pub fn terminal_stats(&self) -> TerminalStats {
        let last = self.num_timesteps() - 1;
        TerminalStats {
            sqrt_alpha_bar_t: self.sqrt_alpha_bars[last],
            residual_mean_scale: self.sqrt_alpha_bars[last],
            one_minus_alpha_bar_t: 1.0 - self.alpha_bars[last],
        }
    }
}

/// Linear betas from `beta_start` to `beta_end` over `timesteps` steps.
pub fn make_linear_schedule(
    timesteps: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule> {
    if timesteps == 0 {
        return Err(Error::StepsOutOfRange { steps: 0, max: 0 });
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidBetaRange);
    }
    let betas = if timesteps == 1 {
        vec![beta_start]
    } else {
        let step = (beta_end - beta_start) / (timesteps - 1) as f64;
        (0..timesteps)
            .map(|t| beta_start + t as f64 * step)
            .collect()
    };
    NoiseSchedule::from_betas(betas)
}
