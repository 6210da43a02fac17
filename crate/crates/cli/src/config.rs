use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use pushpull_core::FrameConfig;

/// Environment variable consulted for `--seed` when the flag is absent.
pub const SEED_ENV: &str = "PUSHPULL_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Frame geometry: built-in defaults, then `--config`, then per-field flags.
#[derive(Args, Debug, Clone, Default)]
pub struct FrameArgs {
    /// JSON file with fields tau_s, F, k_w, k_t, k_c.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Slot duration in seconds.
    #[arg(long)]
    pub tau_s: Option<f64>,
    /// Slots per frame (F).
    #[arg(long = "slots", value_name = "F")]
    pub slots: Option<u32>,
    #[arg(long)]
    pub k_w: Option<u32>,
    #[arg(long)]
    pub k_t: Option<u32>,
    #[arg(long)]
    pub k_c: Option<u32>,
}

impl FrameArgs {
    pub fn resolve(&self) -> Result<FrameConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => FrameConfig::DEFAULT,
        };
        if let Some(v) = self.tau_s {
            cfg.tau_s = v;
        }
        if let Some(v) = self.slots {
            cfg.slots = v;
        }
        if let Some(v) = self.k_w {
            cfg.k_w = v;
        }
        if let Some(v) = self.k_t {
            cfg.k_t = v;
        }
        if let Some(v) = self.k_c {
            cfg.k_c = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<FrameConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config(text: &str) -> Result<FrameConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("at `{path}`: {}", e.into_inner())
    })
}
