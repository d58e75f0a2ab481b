use std::path::PathBuf;
use std::process::ExitCode;

use chunkgen_core::search::Strategy;
use chunkgen_harness::commands::{
    cmd_chunk_ablation, cmd_generate, cmd_k_sweep, cmd_metrics, cmd_noise_study, metrics_table,
    DEFAULT_K_VALUES,
};
use chunkgen_harness::config::{check, load_config};
use chunkgen_harness::{HarnessError, Result, RunConfig};
use clap::{Parser, Subcommand};

/// Chunk-by-chunk video generation with initial-noise search on an analytic
/// toy world.
#[derive(Parser)]
#[command(name = "chunkgen", version)]
struct Cli {
    /// JSON run configuration; defaults apply to anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed value, overriding `search.base_seed.value`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for candidate and sweep parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one long video and write its run directory.
    Generate,
    /// Compare k-step and full-step outputs from identical noise.
    KSweep {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_K_VALUES)]
        k: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Metric spread over single-chunk generations from different noises.
    NoiseStudy {
        #[arg(long, default_value_t = 10)]
        noises: usize,
        /// Reuse one noise for every generation.
        #[arg(long)]
        force_equal: bool,
    },
    /// Metrics versus chunk count for each strategy.
    ChunkAblation {
        #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 8])]
        chunks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values = ["naive", "kstep"])]
        strategies: Vec<String>,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
    /// Recompute metrics of a stored video.cbcv.
    Metrics { input: PathBuf },
    /// Print the default configuration.
    DefaultConfig,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.search.base_seed.value = seed;
    }
    let source = cli
        .config
        .as_ref()
        .map_or("<default>".to_string(), |p| p.display().to_string());
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?,
        None => String::new(),
    };
    check(&cfg, &text, &source)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| HarnessError::Internal(e.to_string()))?;
    }
    let cfg = load(&cli)?;
    let quiet = cli.quiet;
    match cli.command {
        Command::Generate => {
            cmd_generate(&cfg, quiet)?;
        }
        Command::KSweep { k, seeds } => {
            let report = cmd_k_sweep(&cfg, &k, seeds, quiet)?;
            if !quiet {
                for s in report.summary {
                    eprintln!(
                        "k={:>3} similarity={:.6} mode_agreement={:.3}",
                        s.k, s.mean_similarity, s.mode_agreement
                    );
                }
            }
        }
        Command::NoiseStudy {
            noises,
            force_equal,
        } => {
            let report = cmd_noise_study(&cfg, noises, force_equal, quiet)?;
            if !quiet {
                for (name, v) in report.stats {
                    eprintln!("{name}: range={:.6} std={:.6}", v.range, v.std);
                }
            }
        }
        Command::ChunkAblation {
            chunks,
            strategies,
            seeds,
        } => {
            let strategies = strategies
                .iter()
                .map(|s| s.parse::<Strategy>())
                .collect::<std::result::Result<Vec<_>, _>>()?;
            cmd_chunk_ablation(&cfg, &chunks, &strategies, seeds, quiet)?;
        }
        Command::Metrics { input } => {
            print!("{}", metrics_table(&cmd_metrics(&cfg, &input)?));
        }
        Command::DefaultConfig => print!("{}", cfg.to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
