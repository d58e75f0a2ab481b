//! Reverse-process sampling on reduced timestep grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::schedule::NoiseSchedule;
use crate::tensor::{sample_standard_normal, Domain, Frame, VideoTensor};
use crate::world::Denoiser;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scheduler {
    /// DDIM update; `eta = 0` is the deterministic probability-flow sampler.
    Ddim { eta: f64 },
    /// DDIM with `eta = 1` and no noise on the final transition.
    Ancestral,
}

impl Default for Scheduler {
    fn default() -> Self {
        Scheduler::Ddim { eta: 0.0 }
    }
}

impl Scheduler {
    pub fn eta(&self) -> f64 {
        match self {
            Scheduler::Ddim { eta } => *eta,
            Scheduler::Ancestral => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub scheduler: Scheduler,
    pub num_steps: usize,
    pub guidance_scale: f64,
    pub step_seed: Seed,
}

impl SamplerConfig {
    pub fn new(scheduler: Scheduler, num_steps: usize, step_seed: Seed) -> Self {
        Self {
            scheduler,
            num_steps,
            guidance_scale: 1.0,
            step_seed,
        }
    }

    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        if self.num_steps == 0 || self.num_steps > schedule.num_timesteps() {
            return Err(Error::StepsOutOfRange {
                steps: self.num_steps,
                max: schedule.num_timesteps(),
            });
        }
        let eta = self.scheduler.eta();
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidConfig(format!("eta {eta} outside [0, 1]")));
        }
        if !self.guidance_scale.is_finite() {
            return Err(Error::InvalidConfig("guidance_scale must be finite".into()));
        }
        Ok(())
    }
}

/// One DDIM transition from `t` to `t_next`; `None` means "return the
/// clean estimate". `step_noise = None` is treated as zero noise.
pub fn ddim_step(
    z_t: &VideoTensor,
    t: usize,
    t_next: Option<usize>,
    eps_hat: &VideoTensor,
    schedule: &NoiseSchedule,
    eta: f64,
    step_noise: Option<&VideoTensor>,
) -> Result<VideoTensor> {
    schedule.check_timestep(t)?;
    z_t.ensure_same_shape(eps_hat)?;
    let ab = schedule.alpha_bar(t);
    let x0 = z_t.axpby(1.0 / ab.sqrt(), eps_hat, -(1.0 - ab).sqrt() / ab.sqrt())?;
    let Some(tn) = t_next else {
        return Ok(x0.with_domain(Domain::Pixel));
    };
    if tn >= t {
        return Err(Error::NotDescending { t, t_next: tn });
    }
    let ab_next = schedule.alpha_bar(tn);
    let sigma = eta * ((1.0 - ab_next) / (1.0 - ab)).sqrt() * (1.0 - ab / ab_next).sqrt();
    let mut dir2 = 1.0 - ab_next - sigma * sigma;
    if dir2 < 0.0 {
        if dir2 < -1e-12 {
            return Err(Error::InvalidEta);
        }
        dir2 = 0.0;
    }
    let z = x0.axpby(ab_next.sqrt(), eps_hat, dir2.sqrt())?;
    match step_noise {
        Some(noise) if sigma != 0.0 => z.axpby(1.0, noise, sigma),
        Some(noise) => {
            z.ensure_same_shape(noise)?;
            Ok(z)
        }
        None => Ok(z),
    }
}

/// Ancestral transition: DDIM with `eta = 1`. The final transition returns
/// the clean estimate without adding noise.
pub fn ancestral_step(
    z_t: &VideoTensor,
    t: usize,
    t_next: Option<usize>,
    eps_hat: &VideoTensor,
    schedule: &NoiseSchedule,
    step_noise: Option<&VideoTensor>,
) -> Result<VideoTensor> {
    ddim_step(z_t, t, t_next, eps_hat, schedule, 1.0, step_noise)
}

/// `eps_uncond + w * (eps_cond - eps_uncond)`.
pub fn cfg_combine(
    eps_cond: &VideoTensor,
    eps_uncond: &VideoTensor,
    w: f64,
) -> Result<VideoTensor> {
    eps_uncond.axpby(1.0 - w, eps_cond, w)
}

#[derive(Debug, Clone)]
pub struct Sampled {
    pub video: VideoTensor,
    pub denoiser_calls: u64,
}

/// Runs the reverse process from `initial_noise` over the `num_steps`-point
/// timestep grid and returns the final clean estimate.
///
/// Step `i` draws its noise from `step_seed.child(i)`, so the result is a
/// pure function of the arguments.
pub fn sample<D: Denoiser + ?Sized>(
    denoiser: &D,
    guide: &Frame,
    initial_noise: &VideoTensor,
    config: &SamplerConfig,
    schedule: &NoiseSchedule,
) -> Result<Sampled> {
    config.validate(schedule)?;
    let grid = schedule.timestep_grid(config.num_steps)?;
    let eta = config.scheduler.eta();
    let mut z = initial_noise.clone().with_domain(Domain::Latent);
    let mut calls = 0u64;
    for (i, &t) in grid.iter().enumerate() {
        let t_next = grid.get(i + 1).copied();
        let mut eps = denoiser.predict_eps(&z, t, guide)?;
        calls += 1;
        if config.guidance_scale != 1.0 {
            let uncond = denoiser
                .predict_eps_uncond(&z, t)
                .ok_or(Error::GuidanceUnavailable(config.guidance_scale))??;
            eps = cfg_combine(&eps, &uncond, config.guidance_scale)?;
        }
        let noise = match t_next {
            Some(_) if eta > 0.0 => Some(sample_standard_normal(
                z.shape(),
                config.step_seed.child(i as u64),
            )),
            _ => None,
        };
        z = ddim_step(&z, t, t_next, &eps, schedule, eta, noise.as_ref())?;
    }
    Ok(Sampled {
        video: z.with_domain(Domain::Pixel),
        denoiser_calls: calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    fn scalar(v: f64) -> VideoTensor {
        VideoTensor::new(Shape::new(1, 1, 1, 1).unwrap(), Domain::Latent, vec![v]).unwrap()
    }

    /// alpha_bar[0] = 0.81, alpha_bar[1] = 0.25.
    fn two_level() -> NoiseSchedule {
        NoiseSchedule::from_betas(vec![0.19, 1.0 - 0.25 / 0.81]).unwrap()
    }

    #[test]
    fn ddim_scalar_arithmetic() {
        let s = two_level();
        let z = ddim_step(&scalar(1.0), 1, Some(0), &scalar(0.5), &s, 0.0, None).unwrap();
        let x0 = (1.0 - 0.75f64.sqrt() * 0.5) / 0.5;
        assert!((x0 - 1.133975).abs() < 1e-6);
        let expected = 0.9 * x0 + 0.19f64.sqrt() * 0.5;
        assert!((z.as_slice()[0] - expected).abs() < 1e-12);
        assert!((z.as_slice()[0] - 1.238522).abs() < 1e-6);

        let with_noise = ddim_step(
            &scalar(1.0),
            1,
            Some(0),
            &scalar(0.5),
            &s,
            0.0,
            Some(&scalar(9.0)),
        )
        .unwrap();
        assert_eq!(with_noise.as_slice(), z.as_slice());

        let x0_only = ddim_step(&scalar(1.0), 1, None, &scalar(0.5), &s, 0.0, None).unwrap();
        assert!((x0_only.as_slice()[0] - x0).abs() < 1e-12);
    }

    #[test]
    fn eta_above_one_is_rejected() {
        let s = two_level();
        let err = ddim_step(&scalar(1.0), 1, Some(0), &scalar(0.5), &s, 3.0, None).unwrap_err();
        assert_eq!(err, Error::InvalidEta);
        assert!(ddim_step(&scalar(1.0), 0, Some(1), &scalar(0.5), &s, 0.0, None).is_err());
    }

    #[test]
    fn ancestral_reductions() {
        let s = two_level();
        let noise = scalar(2.0);
        let last = ancestral_step(&scalar(1.0), 1, None, &scalar(0.5), &s, Some(&noise)).unwrap();
        let x0 = ddim_step(&scalar(1.0), 1, None, &scalar(0.5), &s, 0.0, None).unwrap();
        assert_eq!(last.as_slice(), x0.as_slice());

        let zero = scalar(0.0);
        let a = ancestral_step(&scalar(1.0), 1, Some(0), &scalar(0.5), &s, Some(&zero)).unwrap();
        let b = ddim_step(&scalar(1.0), 1, Some(0), &scalar(0.5), &s, 1.0, None).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn cfg_identities() {
        let c = scalar(1.0);
        let u = scalar(0.0);
        assert_eq!(cfg_combine(&c, &u, 1.0).unwrap().as_slice(), &[1.0]);
        assert_eq!(cfg_combine(&c, &u, 0.0).unwrap().as_slice(), &[0.0]);
        assert_eq!(cfg_combine(&c, &u, 7.5).unwrap().as_slice(), &[7.5]);
        let other = VideoTensor::zeros(Shape::new(2, 1, 1, 1).unwrap(), Domain::Latent);
        assert!(cfg_combine(&c, &other, 2.0).is_err());
    }

    #[test]
    fn config_validation() {
        let s = two_level();
        let seed = Seed::new(0, 0);
        assert!(SamplerConfig::new(Scheduler::Ancestral, 2, seed)
            .validate(&s)
            .is_ok());
        assert!(SamplerConfig::new(Scheduler::Ancestral, 3, seed)
            .validate(&s)
            .is_err());
        assert!(SamplerConfig::new(Scheduler::Ddim { eta: 1.5 }, 1, seed)
            .validate(&s)
            .is_err());
    }
}
