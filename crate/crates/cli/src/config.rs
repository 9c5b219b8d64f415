use std::path::Path;

use anyhow::{bail, Context};
use getok_core::codec::ConversionConfig;
use getok_core::offset::{OffsetConfig, PoolWeights};
use getok_core::reward::{GridComponentWeights, OffsetComponentWeights, RewardWeights};
use getok_core::vocab::{GridGeometry, DEFAULT_GRID, DEFAULT_OFFSET_GRANULARITY};
use serde::{Deserialize, Serialize};

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "GETOK_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OffsetSection {
    pub band_width: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub weights: PoolWeights,
    pub corner_jitter: u32,
}

impl Default for OffsetSection {
    fn default() -> Self {
        let d = OffsetConfig::default();
        Self {
            band_width: d.band_width,
            k_min: d.k_min,
            k_max: d.k_max,
            weights: d.weights,
            corner_jitter: d.corner_jitter,
        }
    }
}

/// Settings shared by every command. JSON config files use these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub grid: u32,
    pub offset_m: u32,
    /// Square side masks are resized to when building offset data; 0 keeps them as is.
    pub resize: u32,
    pub tau: f64,
    pub seed: u64,
    pub jobs: usize,
    pub reward: RewardWeights,
    pub grid_weights: GridComponentWeights,
    pub offset_weights: OffsetComponentWeights,
    pub offset: OffsetSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            offset_m: DEFAULT_OFFSET_GRANULARITY,
            resize: 840,
            tau: 0.85,
            seed: 0,
            jobs: 0,
            reward: RewardWeights::default(),
            grid_weights: GridComponentWeights::default(),
            offset_weights: OffsetComponentWeights::default(),
            offset: OffsetSection::default(),
        }
    }
}

/// Values given on the command line; `None` leaves the config value alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub grid: Option<u32>,
    pub offset_m: Option<u32>,
    pub resize: Option<u32>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(file: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        if let Some(v) = flags.grid {
            cfg.grid = v;
        }
        if let Some(v) = flags.offset_m {
            cfg.offset_m = v;
        }
        if let Some(v) = flags.resize {
            cfg.resize = v;
        }
        if let Some(v) = flags.tau {
            cfg.tau = v;
        }
        if let Some(v) = flags.seed {
            cfg.seed = v;
        }
        if let Some(v) = flags.jobs {
            cfg.jobs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        GridGeometry::new(self.grid, self.offset_m, 1, 1)?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            bail!("tau {} outside (0, 1]", self.tau);
        }
        self.reward.validate()?;
        self.offset_config().validate()?;
        Ok(())
    }

    /// Grid and offset sizes over an image of the given size.
    pub fn geometry(&self, width: usize, height: usize) -> getok_core::Result<GridGeometry> {
        GridGeometry::new(self.grid, self.offset_m, width as u32, height as u32)
    }

    pub fn conversion(&self) -> ConversionConfig {
        ConversionConfig {
            tau: self.tau,
            ..ConversionConfig::default()
        }
    }

    pub fn offset_config(&self) -> OffsetConfig {
        OffsetConfig {
            band_width: self.offset.band_width,
            k_min: self.offset.k_min,
            k_max: self.offset.k_max,
            weights: self.offset.weights,
            tau: self.tau,
            corner_jitter: self.offset.corner_jitter,
            resize: (self.resize > 0).then_some(self.resize),
        }
    }
}
