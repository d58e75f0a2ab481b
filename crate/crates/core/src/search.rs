//! Autoregressive chunk-by-chunk generation with initial-noise search.
//!
//! For each chunk, `m` candidate noises are drawn. The `kstep` strategy
//! denoises each candidate with a coarse `k`-step run, scores the rough
//! chunks against the guide, and fully denoises only the winner with `s`
//! steps. `bruteforce` fully denoises every candidate and keeps the best;
//! `naive` takes the first candidate unscored. The last frame of each chunk
//! becomes the guide of the next.
//!
//! Seeds: candidate `j` of chunk `i` uses stream `i*(m+1) + j` of the base
//! seed for its initial noise and for the step noise of its `k`-step run.
//! Every full-step run of chunk `i` takes its step noise from stream
//! `i*(m+1) + m`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::CandidateScorer;
use crate::rng::Seed;
use crate::sampler::{sample, SamplerConfig, Scheduler};
use crate::schedule::NoiseSchedule;
use crate::tensor::{concat_chunks, last_frame, sample_standard_normal, Frame, Shape, VideoTensor};
use crate::world::Denoiser;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Naive,
    Kstep,
    Bruteforce,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Kstep => "kstep",
            Strategy::Bruteforce => "bruteforce",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Strategy::Naive),
            "kstep" => Ok(Strategy::Kstep),
            "bruteforce" => Ok(Strategy::Bruteforce),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Number of chunks `n`.
    pub chunks: usize,
    /// Candidates per chunk `m`.
    pub candidates: usize,
    /// Coarse evaluation steps `k`.
    pub eval_steps: usize,
    /// Full sampling steps `s`.
    pub full_steps: usize,
    pub strategy: Strategy,
    pub base_seed: Seed,
    pub scheduler: Scheduler,
    pub guidance_scale: f64,
    /// Drop frame 0 of every chunk after the first when concatenating.
    pub drop_joint_frame: bool,
    /// Evaluate candidates on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            chunks: 5,
            candidates: 5,
            eval_steps: 8,
            full_steps: 50,
            strategy: Strategy::Kstep,
            base_seed: Seed::new(0, 0),
            scheduler: Scheduler::default(),
            guidance_scale: 1.0,
            drop_joint_frame: false,
            parallel: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self, schedule: &NoiseSchedule) -> Result<()> {
        let t = schedule.num_timesteps();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.chunks == 0 {
            return bad("search.chunks must be >= 1".into());
        }
        if self.candidates == 0 {
            return bad("search.candidates must be >= 1".into());
        }
        if self.eval_steps == 0 || self.eval_steps > self.full_steps {
            return bad(format!(
                "search.eval_steps must lie in [1, full_steps = {}]",
                self.full_steps
            ));
        }
        if self.full_steps > t {
            return bad(format!("search.full_steps must be <= T = {t}"));
        }
        self.sampler(self.full_steps, self.base_seed)
            .validate(schedule)
    }

    fn stream_base(&self, chunk: usize) -> u64 {
        (chunk as u64) * (self.candidates as u64 + 1)
    }

    pub fn candidate_seed(&self, chunk: usize, candidate: usize) -> Seed {
        self.base_seed.with_stream(
            self.base_seed
                .stream
                .wrapping_add(self.stream_base(chunk) + candidate as u64),
        )
    }

    pub fn full_step_seed(&self, chunk: usize) -> Seed {
        self.candidate_seed(chunk, self.candidates)
    }

    pub fn sampler(&self, num_steps: usize, step_seed: Seed) -> SamplerConfig {
        SamplerConfig {
            scheduler: self.scheduler,
            num_steps,
            guidance_scale: self.guidance_scale,
            step_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub chunk_index: usize,
    /// One score per candidate; empty for the naive strategy.
    pub candidate_scores: Vec<f64>,
    pub chosen_index: usize,
    pub chosen_mode: Option<usize>,
    pub denoiser_calls: u64,
    pub guide_frame_checksum: String,
    /// Frame range `[start, end)` of this chunk in the concatenated video.
    pub frames: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoSummary {
    pub shape: Shape,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SearchConfig,
    pub chunks: Vec<ChunkRecord>,
    pub total_denoiser_calls: u64,
    pub video: VideoSummary,
}

/// Index of the largest score, lowest index on ties.
pub fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Denoiser calls a strategy spends on `n` chunks.
pub fn search_cost(strategy: Strategy, n: u64, m: u64, k: u64, s: u64) -> u64 {
    match strategy {
        Strategy::Naive => n * s,
        Strategy::Kstep => n * (m * k + s),
        Strategy::Bruteforce => n * m * s,
    }
}

fn map_candidates<T: Send>(
    config: &SearchConfig,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if config.parallel {
        (0..config.candidates).into_par_iter().map(f).collect()
    } else {
        (0..config.candidates).map(f).collect()
    }
}

struct Candidate {
    noise: VideoTensor,
    video: VideoTensor,
    score: f64,
    calls: u64,
}

#[allow(clippy::too_many_arguments)]
fn run_candidates<D: Denoiser + ?Sized>(
    denoiser: &D,
    scorer: &dyn CandidateScorer,
    guide: &Frame,
    chunk_index: usize,
    chunk_shape: Shape,
    num_steps: usize,
    shared_step_seed: Option<Seed>,
    config: &SearchConfig,
    schedule: &NoiseSchedule,
) -> Result<Vec<Candidate>> {
    map_candidates(config, |j| {
        let seed = config.candidate_seed(chunk_index, j);
        let noise = sample_standard_normal(chunk_shape, seed);
        let out = sample(
            denoiser,
            guide,
            &noise,
            &config.sampler(num_steps, shared_step_seed.unwrap_or(seed)),
            schedule,
        )?;
        let score = scorer.score(&out.video, guide)?;
        Ok(Candidate {
            noise,
            video: out.video,
            score,
            calls: out.denoiser_calls,
        })
    })
}

fn record(chunk_index: usize, guide: &Frame, candidates: &[Candidate]) -> (usize, ChunkRecord) {
    let scores: Vec<f64> = candidates.iter().map(|c| c.score).collect();
    let chosen = argmax_first(&scores);
    let rec = ChunkRecord {
        chunk_index,
        candidate_scores: scores,
        chosen_index: chosen,
        chosen_mode: None,
        denoiser_calls: candidates.iter().map(|c| c.calls).sum(),
        guide_frame_checksum: guide.checksum(),
        frames: (0, 0),
    };
    (chosen, rec)
}

/// Scores `m` coarse `k`-step runs and returns the winning initial noise.
/// The record's call count covers the `m * k` evaluation calls only.
pub fn select_noise_kstep<D: Denoiser + ?Sized>(
    denoiser: &D,
    scorer: &dyn CandidateScorer,
    guide: &Frame,
    chunk_index: usize,
    chunk_shape: Shape,
    config: &SearchConfig,
    schedule: &NoiseSchedule,
) -> Result<(VideoTensor, ChunkRecord)> {
    let mut cands = run_candidates(
        denoiser,
        scorer,
        guide,
        chunk_index,
        chunk_shape,
        config.eval_steps,
        None,
        config,
        schedule,
    )?;
    let (chosen, rec) = record(chunk_index, guide, &cands);
    Ok((cands.swap_remove(chosen).noise, rec))
}

/// Fully denoises all `m` candidates and returns the winner's noise and
/// video; `m * s` calls. Every candidate uses the chunk's full-step seed for
/// its step noise, so the winner's video is the one a full run of the same
/// noise would produce.
pub fn select_noise_bruteforce<D: Denoiser + ?Sized>(
    denoiser: &D,
    scorer: &dyn CandidateScorer,
    guide: &Frame,
    chunk_index: usize,
    chunk_shape: Shape,
    config: &SearchConfig,
    schedule: &NoiseSchedule,
) -> Result<(VideoTensor, VideoTensor, ChunkRecord)> {
    let mut cands = run_candidates(
        denoiser,
        scorer,
        guide,
        chunk_index,
        chunk_shape,
        config.full_steps,
        Some(config.full_step_seed(chunk_index)),
        config,
        schedule,
    )?;
    let (chosen, mut rec) = record(chunk_index, guide, &cands);
    let winner = cands.swap_remove(chosen);
    rec.chosen_mode = denoiser.classify(&winner.video, guide);
    Ok((winner.noise, winner.video, rec))
}

/// Generates one chunk from `guide` under the configured strategy.
pub fn generate_chunk<D: Denoiser + ?Sized>(
    denoiser: &D,
    scorer: &dyn CandidateScorer,
    guide: &Frame,
    chunk_index: usize,
    chunk_shape: Shape,
    config: &SearchConfig,
    schedule: &NoiseSchedule,
) -> Result<(VideoTensor, ChunkRecord)> {
    let full = |noise: &VideoTensor| {
        sample(
            denoiser,
            guide,
            noise,
            &config.sampler(config.full_steps, config.full_step_seed(chunk_index)),
            schedule,
        )
    };
    let (video, mut rec) = match config.strategy {
        Strategy::Naive => {
            let noise = sample_standard_normal(chunk_shape, config.candidate_seed(chunk_index, 0));
            let out = full(&noise)?;
            let rec = ChunkRecord {
                chunk_index,
                candidate_scores: Vec::new(),
                chosen_index: 0,
                chosen_mode: None,
                denoiser_calls: out.denoiser_calls,
                guide_frame_checksum: guide.checksum(),
                frames: (0, 0),
            };
            (out.video, rec)
        }
        Strategy::Kstep => {
            let (noise, mut rec) = select_noise_kstep(
                denoiser,
                scorer,
                guide,
                chunk_index,
                chunk_shape,
                config,
                schedule,
            )?;
            let out = full(&noise)?;
            rec.denoiser_calls += out.denoiser_calls;
            (out.video, rec)
        }
        Strategy::Bruteforce => {
            let (_, video, rec) = select_noise_bruteforce(
                denoiser,
                scorer,
                guide,
                chunk_index,
                chunk_shape,
                config,
                schedule,
            )?;
            (video, rec)
        }
    };
    if rec.chosen_mode.is_none() {
        rec.chosen_mode = denoiser.classify(&video, guide);
    }
    Ok((video, rec))
}

/// Generates `n` chunks autoregressively and concatenates them.
pub fn generate_long_video<D: Denoiser + ?Sized>(
    denoiser: &D,
    scorer: &dyn CandidateScorer,
    initial_guide: &Frame,
    chunk_len: usize,
    config: &SearchConfig,
    schedule: &NoiseSchedule,
) -> Result<(VideoTensor, RunRecord)> {
    config.validate(schedule)?;
    let chunk_shape = initial_guide.shape().with_frames(chunk_len);
    let mut guide = initial_guide.clone();
    let mut parts = Vec::with_capacity(config.chunks);
    let mut records = Vec::with_capacity(config.chunks);
    let mut start = 0;
    for i in 0..config.chunks {
        let (chunk, mut rec) =
            generate_chunk(denoiser, scorer, &guide, i, chunk_shape, config, schedule)?;
        guide = last_frame(&chunk);
        let part = if i > 0 && config.drop_joint_frame && chunk.frames() > 1 {
            chunk.slice_frames(1, chunk.frames())?
        } else {
            chunk
        };
        rec.frames = (start, start + part.frames());
        start += part.frames();
        parts.push(part);
        records.push(rec);
    }
    let video = concat_chunks(&parts)?;
    let total = records.iter().map(|r| r.denoiser_calls).sum();
    let run = RunRecord {
        config: config.clone(),
        chunks: records,
        total_denoiser_calls: total,
        video: VideoSummary {
            shape: video.shape(),
            checksum: video.checksum(),
        },
    };
    Ok((video, run))
}
