//! The experiment commands behind the CLI. Each writes its reports and a
//! `manifest.json` into the configured output directory.

use std::path::Path;
use std::time::Instant;

use chunkgen_core::cbcv;
use chunkgen_core::evaluator::cosine_similarity;
use chunkgen_core::metrics::{
    background_consistency, motion_smoothness, subject_consistency, temporal_flickering,
    variability_stats, VariabilityStats, METRIC_NAMES,
};
use chunkgen_core::sampler::sample;
use chunkgen_core::schedule::NoiseSchedule;
use chunkgen_core::search::{generate_long_video, SearchConfig, Strategy};
use chunkgen_core::tensor::{last_frame, sample_standard_normal};
use chunkgen_core::world::{Denoiser, ToyDenoiser};
use chunkgen_core::{Frame, Seed, VideoTensor};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::manifest::Manifest;
use crate::ppm::write_ppm;
use crate::report::{fmt_num, fmt_opt, write_csv};

pub const DEFAULT_K_VALUES: [usize; 9] = [1, 2, 4, 6, 8, 12, 20, 35, 50];

pub struct Setup {
    pub schedule: NoiseSchedule,
    pub denoiser: ToyDenoiser,
    pub guide: Frame,
}

pub fn setup(cfg: &RunConfig) -> Result<Setup> {
    cfg.validate().map_err(|(_, m)| HarnessError::Config(m))?;
    let schedule = cfg.schedule.build()?;
    let denoiser = ToyDenoiser::new(cfg.world.clone(), schedule.clone())?;
    let guide = cfg.guide.render(cfg.world.frame_shape)?;
    Ok(Setup {
        schedule,
        denoiser,
        guide,
    })
}

fn log(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// The four metrics in [`METRIC_NAMES`] order; `None` where the video is too
/// short for a metric.
pub fn video_metrics(video: &VideoTensor, cfg: &RunConfig) -> Result<[Option<f64>; 4]> {
    let opt = |r: chunkgen_core::Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(chunkgen_core::Error::TooFewFrames { .. }) => Ok(None),
        Err(e) => Err(HarnessError::from(e)),
    };
    Ok([
        opt(subject_consistency(video, &cfg.evaluator.embedder))?,
        opt(background_consistency(video, &cfg.evaluator.background))?,
        opt(temporal_flickering(video))?,
        opt(motion_smoothness(video))?,
    ])
}

/// Cosine similarity of two videos after centering pixels on `reference`.
pub fn video_similarity(a: &VideoTensor, b: &VideoTensor, reference: f64) -> Result<f64> {
    let center =
        |v: &VideoTensor| -> Vec<f64> { v.as_slice().iter().map(|x| x - reference).collect() };
    Ok(cosine_similarity(&center(a), &center(b))?)
}

const METRICS_HEADER: [&str; 11] = [
    "scope",
    "chunk",
    "start_frame",
    "end_frame",
    "chosen_index",
    "chosen_mode",
    "selection_score",
    METRIC_NAMES[0],
    METRIC_NAMES[1],
    METRIC_NAMES[2],
    METRIC_NAMES[3],
];

/// Runs the configured search end to end and writes the run directory.
pub fn cmd_generate(cfg: &RunConfig, quiet: bool) -> Result<Manifest> {
    let mut manifest = Manifest::new("generate", cfg);
    let t = Instant::now();
    let s = setup(cfg)?;
    let dir = cfg.output_dir.as_path();
    create_dir(dir)?;
    manifest.time("setup", t);

    let t = Instant::now();
    log(
        quiet,
        format!(
            "generating {} chunks ({}, m={}, k={}, s={})",
            cfg.search.chunks,
            cfg.search.strategy.name(),
            cfg.search.candidates,
            cfg.search.eval_steps,
            cfg.search.full_steps
        ),
    );
    let (video, run) = generate_long_video(
        &s.denoiser,
        &cfg.evaluator.scorer(),
        &s.guide,
        cfg.world.chunk_len,
        &cfg.search,
        &s.schedule,
    )?;
    manifest.time("generate", t);

    let t = Instant::now();
    let mut rows = Vec::new();
    for c in &run.chunks {
        let part = video.slice_frames(c.frames.0, c.frames.1)?;
        let mut row = vec![
            "chunk".to_string(),
            c.chunk_index.to_string(),
            c.frames.0.to_string(),
            c.frames.1.to_string(),
            c.chosen_index.to_string(),
            c.chosen_mode.map(|m| m.to_string()).unwrap_or_default(),
            fmt_opt(c.candidate_scores.get(c.chosen_index).copied()),
        ];
        row.extend(video_metrics(&part, cfg)?.map(fmt_opt));
        rows.push(row);
    }
    let mut row = vec![
        "video".to_string(),
        String::new(),
        "0".into(),
        video.frames().to_string(),
        String::new(),
        String::new(),
        String::new(),
    ];
    row.extend(video_metrics(&video, cfg)?.map(fmt_opt));
    rows.push(row);
    manifest.time("metrics", t);

    let t = Instant::now();
    write_csv(&dir.join("metrics.csv"), &METRICS_HEADER, &rows)?;
    manifest.add_file(dir, "metrics.csv")?;
    if cfg.emit_tensor {
        let path = dir.join("video.cbcv");
        std::fs::write(&path, cbcv::encode(&video)).map_err(|e| HarnessError::io(&path, e))?;
        manifest.add_file(dir, "video.cbcv")?;
    }
    if cfg.emit_frames {
        create_dir(&dir.join("frames"))?;
        for i in 0..video.frames() {
            let frame = last_frame(&video.slice_frames(i, i + 1)?);
            let rel = format!("frames/frame_{i:05}.ppm");
            write_ppm(&frame, &dir.join(&rel))?;
            manifest.add_file(dir, &rel)?;
        }
    }
    manifest.time("write", t);
    manifest.run = Some(run);
    manifest.write(dir)?;
    log(quiet, format!("wrote {}", dir.display()));
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepRow {
    pub k: usize,
    pub seed: u64,
    pub similarity: f64,
    pub mode_match: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepSummary {
    pub k: usize,
    pub mean_similarity: f64,
    pub mode_agreement: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepReport {
    pub rows: Vec<KSweepRow>,
    pub summary: Vec<KSweepSummary>,
}

fn sweep_seed(cfg: &RunConfig, index: u64) -> Seed {
    let base = cfg.search.base_seed;
    base.with_stream(base.stream.wrapping_add(index))
}

/// For each seed, denoises one noise with `k` steps and with the full step
/// count and compares the two outputs.
pub fn cmd_k_sweep(
    cfg: &RunConfig,
    k_values: &[usize],
    seeds: usize,
    quiet: bool,
) -> Result<KSweepReport> {
    let s = setup(cfg)?;
    let full = cfg.search.full_steps;
    if k_values.is_empty() || k_values.iter().any(|&k| k == 0 || k > full) {
        return Err(HarnessError::Config(format!(
            "k values must be non-empty and lie in [1, {full}]"
        )));
    }
    if seeds == 0 {
        return Err(HarnessError::Config("seeds must be >= 1".into()));
    }
    let dir = cfg.output_dir.as_path();
    create_dir(dir)?;
    let mut manifest = Manifest::new("k-sweep", cfg);
    let t = Instant::now();
    log(quiet, format!("k-sweep over {k_values:?}, {seeds} seeds"));
    let reference_level = cfg.evaluator.embedder.reference_level;
    let shape = cfg.world.chunk_shape();
    let per_seed: Vec<Vec<KSweepRow>> = (0..seeds as u64)
        .into_par_iter()
        .map(|r| {
            let seed = sweep_seed(cfg, r);
            let noise = sample_standard_normal(shape, seed);
            let run = |steps| {
                sample(
                    &s.denoiser,
                    &s.guide,
                    &noise,
                    &cfg.search.sampler(steps, seed),
                    &s.schedule,
                )
                .map(|o| o.video)
            };
            let reference = run(full)?;
            let ref_mode = s.denoiser.classify(&reference, &s.guide);
            k_values
                .iter()
                .map(|&k| {
                    let v = if k == full {
                        reference.clone()
                    } else {
                        run(k)?
                    };
                    Ok(KSweepRow {
                        k,
                        seed: r,
                        similarity: video_similarity(&v, &reference, reference_level)?,
                        mode_match: s.denoiser.classify(&v, &s.guide) == ref_mode,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<KSweepRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.k, r.seed));
    let mut ks: Vec<usize> = k_values.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let summary: Vec<KSweepSummary> = ks
        .iter()
        .map(|&k| {
            let group: Vec<&KSweepRow> = rows.iter().filter(|r| r.k == k).collect();
            let n = group.len() as f64;
            KSweepSummary {
                k,
                mean_similarity: group.iter().map(|r| r.similarity).sum::<f64>() / n,
                mode_agreement: group.iter().filter(|r| r.mode_match).count() as f64 / n,
            }
        })
        .collect();
    manifest.time("sweep", t);

    let t = Instant::now();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.seed.to_string(),
                fmt_num(r.similarity),
                r.mode_match.to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("k_sweep.csv"),
        &["k", "seed", "similarity", "mode_match"],
        &csv_rows,
    )?;
    let sum_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                fmt_num(r.mean_similarity),
                fmt_num(r.mode_agreement),
            ]
        })
        .collect();
    write_csv(
        &dir.join("k_sweep_summary.csv"),
        &["k", "mean_similarity", "mode_agreement"],
        &sum_rows,
    )?;
    manifest.add_file(dir, "k_sweep.csv")?;
    manifest.add_file(dir, "k_sweep_summary.csv")?;
    manifest.time("write", t);
    manifest.write(dir)?;
    Ok(KSweepReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRun {
    pub noise: u64,
    pub mode: Option<usize>,
    pub metrics: [Option<f64>; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStudyReport {
    pub runs: Vec<NoiseRun>,
    /// One entry per metric that every run could compute.
    pub stats: Vec<(&'static str, VariabilityStats)>,
}

/// Single-chunk generations from `num_noises` noises, summarized per metric.
/// With `force_equal`, every run reuses the first noise.
pub fn cmd_noise_study(
    cfg: &RunConfig,
    num_noises: usize,
    force_equal: bool,
    quiet: bool,
) -> Result<NoiseStudyReport> {
    let s = setup(cfg)?;
    if num_noises < 2 {
        return Err(HarnessError::Config(
            "noise study needs at least 2 noises".into(),
        ));
    }
    let dir = cfg.output_dir.as_path();
    create_dir(dir)?;
    let mut manifest = Manifest::new("noise-study", cfg);
    let t = Instant::now();
    log(quiet, format!("noise study with {num_noises} noises"));
    let shape = cfg.world.chunk_shape();
    let runs: Vec<NoiseRun> = (0..num_noises as u64)
        .into_par_iter()
        .map(|i| {
            let seed = sweep_seed(cfg, if force_equal { 0 } else { i });
            let noise = sample_standard_normal(shape, seed);
            let out = sample(
                &s.denoiser,
                &s.guide,
                &noise,
                &cfg.search.sampler(cfg.search.full_steps, seed),
                &s.schedule,
            )?;
            Ok(NoiseRun {
                noise: i,
                mode: s.denoiser.classify(&out.video, &s.guide),
                metrics: video_metrics(&out.video, cfg)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut stats = Vec::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let values: Option<Vec<f64>> = runs.iter().map(|r| r.metrics[m]).collect();
        if let Some(values) = values {
            stats.push((*name, variability_stats(&values)?));
        }
    }
    manifest.time("study", t);

    let t = Instant::now();
    let mut header = vec!["noise", "mode"];
    header.extend(METRIC_NAMES);
    let run_rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![
                r.noise.to_string(),
                r.mode.map(|m| m.to_string()).unwrap_or_default(),
            ];
            row.extend(r.metrics.map(fmt_opt));
            row
        })
        .collect();
    write_csv(&dir.join("noise_study_runs.csv"), &header, &run_rows)?;
    let stat_rows: Vec<Vec<String>> = stats
        .iter()
        .map(|(name, v)| {
            vec![
                name.to_string(),
                fmt_num(v.min),
                fmt_num(v.max),
                fmt_num(v.range),
                fmt_num(v.std),
            ]
        })
        .collect();
    write_csv(
        &dir.join("noise_study.csv"),
        &["metric", "min", "max", "range", "std"],
        &stat_rows,
    )?;
    manifest.add_file(dir, "noise_study.csv")?;
    manifest.add_file(dir, "noise_study_runs.csv")?;
    manifest.time("write", t);
    manifest.write(dir)?;
    Ok(NoiseStudyReport { runs, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRun {
    pub strategy: Strategy,
    pub chunks: usize,
    pub seed: u64,
    pub metrics: [Option<f64>; 4],
    pub artifact_chunks: usize,
    pub denoiser_calls: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub strategy: Strategy,
    pub chunks: usize,
    pub runs: usize,
    pub means: [Option<f64>; 4],
    pub artifact_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub runs: Vec<AblationRun>,
    pub summary: Vec<AblationSummary>,
}

/// Full factorial of strategies x chunk counts x seeds. Seed `r` uses base
/// seed value `base + r` for every strategy and chunk count.
pub fn cmd_chunk_ablation(
    cfg: &RunConfig,
    chunk_counts: &[usize],
    strategies: &[Strategy],
    seeds: usize,
    quiet: bool,
) -> Result<AblationReport> {
    let s = setup(cfg)?;
    if chunk_counts.is_empty() || chunk_counts.contains(&0) {
        return Err(HarnessError::Config(
            "chunk counts must be non-empty and >= 1".into(),
        ));
    }
    if strategies.is_empty() || seeds == 0 {
        return Err(HarnessError::Config(
            "need at least one strategy and one seed".into(),
        ));
    }
    let dir = cfg.output_dir.as_path();
    create_dir(dir)?;
    let mut manifest = Manifest::new("chunk-ablation", cfg);
    let t = Instant::now();
    let mut jobs = Vec::new();
    for &strategy in strategies {
        for &n in chunk_counts {
            for r in 0..seeds as u64 {
                jobs.push((strategy, n, r));
            }
        }
    }
    log(quiet, format!("chunk ablation: {} runs", jobs.len()));
    let scorer = cfg.evaluator.scorer();
    let runs: Vec<AblationRun> = jobs
        .into_par_iter()
        .map(|(strategy, n, r)| {
            let base = cfg.search.base_seed;
            let search = SearchConfig {
                chunks: n,
                strategy,
                base_seed: Seed::new(base.value.wrapping_add(r), base.stream),
                ..cfg.search.clone()
            };
            let (video, rec) = generate_long_video(
                &s.denoiser,
                &scorer,
                &s.guide,
                cfg.world.chunk_len,
                &search,
                &s.schedule,
            )?;
            let artifact_chunks = rec
                .chunks
                .iter()
                .filter(|c| {
                    c.chosen_mode
                        .is_some_and(|m| !cfg.world.modes[m].is_clean())
                })
                .count();
            Ok(AblationRun {
                strategy,
                chunks: n,
                seed: search.base_seed.value,
                metrics: video_metrics(&video, cfg)?,
                artifact_chunks,
                denoiser_calls: rec.total_denoiser_calls,
            })
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for &strategy in strategies {
        for &n in chunk_counts {
            let group: Vec<&AblationRun> = runs
                .iter()
                .filter(|r| r.strategy == strategy && r.chunks == n)
                .collect();
            let count = group.len() as f64;
            let means = std::array::from_fn(|m| {
                group
                    .iter()
                    .map(|r| r.metrics[m])
                    .sum::<Option<f64>>()
                    .map(|t| t / count)
            });
            let artifacts: usize = group.iter().map(|r| r.artifact_chunks).sum();
            summary.push(AblationSummary {
                strategy,
                chunks: n,
                runs: group.len(),
                means,
                artifact_fraction: artifacts as f64 / (count * n as f64),
            });
        }
    }
    manifest.time("runs", t);

    let t = Instant::now();
    let mut header = vec!["strategy", "n", "seed"];
    header.extend(METRIC_NAMES);
    header.extend(["artifact_chunks", "denoiser_calls"]);
    let run_rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let mut row = vec![
                r.strategy.name().to_string(),
                r.chunks.to_string(),
                r.seed.to_string(),
            ];
            row.extend(r.metrics.map(fmt_opt));
            row.push(r.artifact_chunks.to_string());
            row.push(r.denoiser_calls.to_string());
            row
        })
        .collect();
    write_csv(&dir.join("chunk_ablation.csv"), &header, &run_rows)?;
    let mut header = vec!["strategy", "n", "runs"];
    header.extend(METRIC_NAMES);
    header.push("artifact_fraction");
    let sum_rows: Vec<Vec<String>> = summary
        .iter()
        .map(|r| {
            let mut row = vec![
                r.strategy.name().to_string(),
                r.chunks.to_string(),
                r.runs.to_string(),
            ];
            row.extend(r.means.map(fmt_opt));
            row.push(fmt_num(r.artifact_fraction));
            row
        })
        .collect();
    write_csv(&dir.join("chunk_ablation_summary.csv"), &header, &sum_rows)?;
    manifest.add_file(dir, "chunk_ablation.csv")?;
    manifest.add_file(dir, "chunk_ablation_summary.csv")?;
    manifest.time("write", t);
    manifest.write(dir)?;
    Ok(AblationReport { runs, summary })
}

/// Recomputes the four metrics of a stored `.cbcv` video.
pub fn cmd_metrics(cfg: &RunConfig, input: &Path) -> Result<[Option<f64>; 4]> {
    let bytes = std::fs::read(input).map_err(|e| HarnessError::io(input, e))?;
    let video = cbcv::decode(&bytes).map_err(|e| {
        HarnessError::io(
            input,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        )
    })?;
    video_metrics(&video, cfg)
}

/// `metric,value` lines for [`cmd_metrics`] output.
pub fn metrics_table(values: &[Option<f64>; 4]) -> String {
    let mut out = String::from("metric,value\n");
    for (name, v) in METRIC_NAMES.iter().zip(values) {
        out.push_str(&format!("{name},{}\n", fmt_opt(*v)));
    }
    out
}
