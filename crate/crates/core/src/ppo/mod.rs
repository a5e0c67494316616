//! Proximal policy optimization with a clipped surrogate objective.

mod buffer;
mod train;
mod update;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{AdamConfig, NnError};
use crate::pipeline::PipelineError;

pub use buffer::{compute_gae, RolloutBuffer};
pub use train::{collect_rollout, train, EnvSlot, EpisodeRow, FinishedEpisode, TrainConfig, TrainLog, Trainer, TRAINLOG_HEADER};
pub use update::{minibatch_gradients, ppo_update, Gradients, Minibatch, MinibatchStats, PpoOptimizer, UpdateStats};

#[derive(Debug, Error)]
pub enum PpoError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("non-finite loss in update (policy {policy_loss}, value {value_loss}, entropy {entropy}); update aborted")]
    NonFiniteLoss { policy_loss: f64, value_loss: f64, entropy: f64 },
    #[error("invalid ppo config: {0}")]
    InvalidConfig(String),
}

/// `ppo` config section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub total_timesteps: usize,
    /// Steps collected per environment between updates.
    pub rollout_length: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    pub normalize_advantage: bool,
    /// Multiplier applied to rewards before they enter the buffer. Episode
    /// returns in the log are always unscaled.
    pub reward_scale: f64,
    pub hidden_sizes: Vec<usize>,
    pub adam: AdamConfig,
    /// Write a checkpoint every this many updates (0: only at the end).
    pub checkpoint_every: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 500_000,
            rollout_length: 2048,
            minibatch_size: 64,
            epochs_per_update: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            value_coeff: 0.5,
            entropy_coeff: 0.0,
            max_grad_norm: 0.5,
            n_envs: 1,
            normalize_advantage: true,
            reward_scale: 0.01,
            hidden_sizes: vec![64, 64],
            adam: AdamConfig::default(),
            checkpoint_every: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.rollout_length == 0 || self.minibatch_size == 0 || self.n_envs == 0 || self.epochs_per_update == 0 {
            return bad("rollout_length, minibatch_size, n_envs and epochs_per_update must be positive");
        }
        if self.rollout_length % self.minibatch_size != 0 {
            return bad("rollout_length must be divisible by minibatch_size");
        }
        if !(self.max_grad_norm > 0.0 && self.reward_scale > 0.0 && self.adam.lr > 0.0) {
            return bad("max_grad_norm, reward_scale and adam.lr must be positive");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes must be non-empty and positive");
        }
        Ok(())
    }

    /// Number of collect/update iterations needed to reach `total_timesteps`.
    pub fn num_updates(&self) -> usize {
        let per = self.rollout_length * self.n_envs;
        self.total_timesteps.div_ceil(per).max(1)
    }
}
