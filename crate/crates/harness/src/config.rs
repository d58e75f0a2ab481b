//! The run configuration file: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use chunkgen_core::evaluator::{Aggregator, GuideSimilarity, HistogramEmbedder, PoolEmbedder};
use chunkgen_core::guide::GuideSpec;
use chunkgen_core::schedule::LinearScheduleParams;
use chunkgen_core::search::SearchConfig;
use chunkgen_core::world::WorldSpec;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluatorConfig {
    /// Scores candidates against the guide and drives subject consistency.
    pub embedder: PoolEmbedder,
    pub aggregator: Aggregator,
    /// Drives background consistency.
    pub background: HistogramEmbedder,
}

impl EvaluatorConfig {
    pub fn scorer(&self) -> GuideSimilarity {
        GuideSimilarity {
            embedder: self.embedder,
            aggregator: self.aggregator,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub world: WorldSpec,
    pub schedule: LinearScheduleParams,
    pub search: SearchConfig,
    pub evaluator: EvaluatorConfig,
    pub guide: GuideSpec,
    pub output_dir: PathBuf,
    pub emit_frames: bool,
    pub emit_tensor: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: WorldSpec::default(),
            schedule: LinearScheduleParams::default(),
            search: SearchConfig::default(),
            evaluator: EvaluatorConfig::default(),
            guide: GuideSpec::default(),
            output_dir: PathBuf::from("run"),
            emit_frames: true,
            emit_tensor: true,
        }
    }
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Checks every section; the error names the section and field.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        fn at(section: &'static str) -> impl Fn(chunkgen_core::Error) -> (String, String) {
            move |e| (section.to_string(), message(e))
        }
        self.world.validate().map_err(at("world"))?;
        let schedule = self.schedule.build().map_err(at("schedule"))?;
        self.search.validate(&schedule).map_err(at("search"))?;
        if self.evaluator.embedder.grid == 0 {
            return Err((
                "evaluator".into(),
                "evaluator.embedder.grid must be >= 1".into(),
            ));
        }
        if self.evaluator.background.bins == 0 {
            return Err((
                "evaluator".into(),
                "evaluator.background.bins must be >= 1".into(),
            ));
        }
        self.guide
            .render(self.world.frame_shape)
            .map_err(at("guide"))?;
        if self.emit_frames && ![1, 3].contains(&self.world.frame_shape.channels) {
            return Err((
                "emit_frames".into(),
                "emit_frames needs frames with 1 or 3 channels".into(),
            ));
        }
        Ok(())
    }
}

fn message(e: chunkgen_core::Error) -> String {
    match e {
        chunkgen_core::Error::InvalidConfig(m) => m,
        other => other.to_string(),
    }
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Position of `"key"` for a dotted path like `search.chunks`, searching each
/// segment after the previous one. Falls back to the deepest segment found.
fn locate(text: &str, path: &str) -> (usize, usize) {
    let mut offset = None;
    let mut from = 0;
    for seg in path.split('.') {
        let needle = format!("\"{seg}\"");
        match text[from..].find(&needle) {
            Some(i) => {
                from += i;
                offset = Some(from);
            }
            None => break,
        }
    }
    offset.map_or((1, 1), |o| line_col(text, o))
}

/// Parses and validates a config document. Errors read `source:line:col: message`.
pub fn parse_config(text: &str, source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        let msg = msg.rfind(" at line ").map_or(msg.as_str(), |i| &msg[..i]);
        HarnessError::Config(format!("{source}:{}:{}: {msg}", e.line(), e.column()))
    })?;
    check(&cfg, text, source)?;
    Ok(cfg)
}

pub fn check(cfg: &RunConfig, text: &str, source: &str) -> Result<()> {
    cfg.validate().map_err(|(section, msg)| {
        let key = msg
            .split_whitespace()
            .next()
            .filter(|w| w.starts_with(&format!("{section}.")))
            .unwrap_or(&section);
        let (line, col) = locate(text, key);
        HarnessError::Config(format!("{source}:{line}:{col}: {msg}"))
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}
