use std::path::Path;

use navlab_core::env::EnvConfig;
use navlab_core::filters::{DenoiserKind, FilterConfig};
use navlab_core::noise::NoiseConfig;
use navlab_core::ppo::{PpoConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sweep::SweepKind;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// An inclusive, evenly spaced grid `start, start + step, ..., stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridRange {
    pub const fn single(v: f64) -> Self {
        Self { start: v, stop: v, step: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(ConfigError::Invalid("grid bounds must be finite".into()));
        }
        if self.stop < self.start || self.step <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "empty grid {}..{} step {}",
                self.start, self.stop, self.step
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid points, computed as `start + i·step` and rounded to 12 decimals
    /// so that e.g. `0.1·3` prints as 0.3.
    pub fn values(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

/// `sweep` section. Ranges left unset fall back to the preset of the chosen
/// sweep kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub episodes_per_cell: usize,
    pub seed: u64,
    pub denoisers: Vec<DenoiserKind>,
    pub mu: Option<GridRange>,
    pub sigma: Option<GridRange>,
    /// Evaluation obstacle counts, independent of the training range.
    pub obstacle_count_min: usize,
    pub obstacle_count_max: usize,
    /// Sample actions instead of taking the policy mean.
    pub stochastic: bool,
    pub kind: Option<SweepKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            episodes_per_cell: 200,
            seed: 0,
            denoisers: vec![DenoiserKind::None],
            mu: None,
            sigma: None,
            obstacle_count_min: 0,
            obstacle_count_max: 3,
            stochastic: false,
            kind: None,
        }
    }
}

/// A complete run configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub noise: NoiseConfig,
    pub filter: FilterConfig,
    pub ppo: PpoConfig,
    pub sweep: SweepConfig,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string().trim_end().replace('\n', " | "),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ppo.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let n = &self.noise;
        if ![n.mu, n.sigma, n.injected_mu, n.injected_sigma].iter().all(|v| v.is_finite())
            || n.sigma < 0.0
            || n.injected_sigma < 0.0
        {
            return Err(ConfigError::Invalid("noise parameters must be finite with sigma >= 0".into()));
        }
        let s = &self.sweep;
        if s.episodes_per_cell == 0 {
            return Err(ConfigError::Invalid("sweep.episodes_per_cell must be positive".into()));
        }
        if s.denoisers.is_empty() {
            return Err(ConfigError::Invalid("sweep.denoisers must not be empty".into()));
        }
        if s.obstacle_count_min > s.obstacle_count_max {
            return Err(ConfigError::Invalid("sweep obstacle count range is empty".into()));
        }
        for r in s.mu.iter().chain(&s.sigma) {
            r.validate()?;
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            env: self.env.clone(),
            noise: self.noise.effective(),
            filter: self.filter.clone(),
            ppo: self.ppo.clone(),
        }
    }

    /// Environment used for evaluation: the training env with the sweep's
    /// obstacle count range.
    pub fn eval_env(&self) -> EnvConfig {
        EnvConfig {
            obstacle_count_min: self.sweep.obstacle_count_min,
            obstacle_count_max: self.sweep.obstacle_count_max,
            ..self.env.clone()
        }
    }
}
