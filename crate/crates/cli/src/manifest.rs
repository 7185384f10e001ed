//! Per-run manifest. It is itself a valid config file: the resolved config
//! in canonical form, preceded by comment lines with the hash and the stages
//! completed under that hash.

use std::path::Path;

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.cfg";

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub stages: Vec<String>,
}

impl Manifest {
    pub fn parse(text: &str) -> Option<Self> {
        let mut hash = None;
        let mut seed = None;
        let mut stages = Vec::new();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else { continue };
            let Some((k, v)) = rest.split_once('=') else { continue };
            match k.trim() {
                "config_hash" => hash = Some(v.trim().to_string()),
                "run_seed" => seed = v.trim().parse().ok(),
                "stages" => {
                    stages = v
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect()
                }
                _ => {}
            }
        }
        Some(Self { config_hash: hash?, seed: seed?, stages })
    }

    pub fn render(&self, cfg: &PipelineConfig) -> String {
        format!(
            "# cryozssr run manifest\n# config_hash = {}\n# run_seed = {}\n# stages = {}\n{}",
            self.config_hash,
            self.seed,
            self.stages.join(", "),
            cfg.to_text()
        )
    }
}

/// Record `stage` in `dir/manifest.cfg`. The stage list restarts whenever the
/// config hash changes.
pub fn record_stage(dir: &Path, cfg: &PipelineConfig, stage: &str) -> CliResult<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let hash = cfg.hash();
    let mut stages = match std::fs::read_to_string(&path).ok().and_then(|t| Manifest::parse(&t)) {
        Some(m) if m.config_hash == hash => m.stages,
        _ => Vec::new(),
    };
    if !stages.iter().any(|s| s == stage) {
        stages.push(stage.to_string());
    }
    let m = Manifest { config_hash: hash, seed: cfg.seed()?, stages };
    std::fs::write(&path, m.render(cfg))
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    Ok(m)
}
