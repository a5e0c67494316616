use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ppo_update, PpoConfig, PpoError, PpoOptimizer, RolloutBuffer, UpdateStats};
use crate::env::{Action, DoneReason, EnvConfig};
use crate::filters::FilterConfig;
use crate::nn::ActorCritic;
use crate::noise::NoiseSpec;
use crate::pipeline::NoisyNav;
use crate::rng::{stream, Stream, StreamKind};

pub const TRAINLOG_HEADER: &str = "step,episode,ep_return,ep_len,mean100_return,mean100_len,policy_loss,value_loss,clip_frac";

const WINDOW: usize = 100;

/// Everything that defines a training run apart from the seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub noise: NoiseSpec,
    pub filter: FilterConfig,
    pub ppo: PpoConfig,
}

/// A rollout worker: one environment plus its in-progress episode.
#[derive(Clone, Debug)]
pub struct EnvSlot {
    pub nav: NoisyNav,
    pub obs: [f32; 4],
    pub ep_return: f64,
    pub ep_len: usize,
}

impl EnvSlot {
    pub fn new(mut nav: NoisyNav) -> Result<Self, PpoError> {
        let obs = nav.reset()?.observation.to_f32();
        Ok(Self { nav, obs, ep_return: 0.0, ep_len: 0 })
    }
}

/// A finished episode as seen by the collector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinishedEpisode {
    /// Global timestep count at which the episode ended.
    pub step: usize,
    pub ep_return: f64,
    pub ep_len: usize,
    pub outcome: DoneReason,
}

/// Step every slot `steps_per_env` times with the stochastic policy, filling
/// `buffer` (which is cleared first). Episodes that end are reset
/// immediately. `step_offset` is the global timestep count before
/// collection; each round of slot steps advances it by `slots.len()`.
pub fn collect_rollout<R: Rng + ?Sized>(
    model: &ActorCritic<f32>,
    slots: &mut [EnvSlot],
    buffer: &mut RolloutBuffer,
    steps_per_env: usize,
    reward_scale: f64,
    step_offset: usize,
    rng: &mut R,
) -> Result<Vec<FinishedEpisode>, PpoError> {
    *buffer = RolloutBuffer::new(slots.len(), steps_per_env * slots.len());
    let mut finished = Vec::new();
    for t in 0..steps_per_env {
        for slot in slots.iter_mut() {
            let ps = model.act(&slot.obs, rng)?;
            let (sensed, out) = slot.nav.step(Action::from_slice(&ps.action).clamped())?;
            let action = [ps.action[0], ps.action[1], ps.action[2]];
            buffer.push(slot.obs, action, ps.log_prob, ps.value, (out.reward * reward_scale) as f32, out.terminal);
            slot.ep_return += out.reward;
            slot.ep_len += 1;
            if out.terminal {
                finished.push(FinishedEpisode {
                    step: step_offset + (t + 1) * buffer.n_envs,
                    ep_return: slot.ep_return,
                    ep_len: slot.ep_len,
                    outcome: out.done_reason,
                });
                slot.obs = slot.nav.reset()?.observation.to_f32();
                slot.ep_return = 0.0;
                slot.ep_len = 0;
            } else {
                slot.obs = sensed.observation.to_f32();
            }
        }
    }
    buffer.last_values = slots.iter().map(|s| model.value(&s.obs)).collect::<Result<_, _>>()?;
    Ok(finished)
}

/// One training-log row, written when an episode ends. Loss columns carry
/// the most recent completed update and are empty before the first.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeRow {
    pub step: usize,
    pub episode: usize,
    pub ep_return: f64,
    pub ep_len: usize,
    pub mean100_return: f64,
    pub mean100_len: f64,
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub clip_frac: Option<f64>,
    pub outcome: DoneReason,
}

impl EpisodeRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.step,
            self.episode,
            self.ep_return,
            self.ep_len,
            self.mean100_return,
            self.mean100_len,
            opt(self.policy_loss),
            opt(self.value_loss),
            opt(self.clip_frac)
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeRow>,
    pub updates: Vec<UpdateStats>,
}

impl TrainLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAINLOG_HEADER}")?;
        for row in &self.episodes {
            writeln!(w, "{}", row.csv_line())?;
        }
        Ok(())
    }

    /// Fraction of the last `n` episodes that reached the goal.
    pub fn recent_success_rate(&self, n: usize) -> Option<f64> {
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        if tail.is_empty() {
            return None;
        }
        Some(tail.iter().filter(|r| r.outcome == DoneReason::Success).count() as f64 / tail.len() as f64)
    }
}

/// Incremental PPO training: one `run_update` is a rollout plus an update.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub seed: u64,
    model: ActorCritic<f32>,
    opt: PpoOptimizer,
    slots: Vec<EnvSlot>,
    buffer: RolloutBuffer,
    policy_rng: Stream,
    shuffle_rng: Stream,
    timesteps: usize,
    updates_done: usize,
    window: VecDeque<(f64, usize)>,
    log: TrainLog,
}

impl Trainer {
    pub fn new(config: TrainConfig, seed: u64) -> Result<Self, PpoError> {
        config.ppo.validate()?;
        let mut init = stream(seed, StreamKind::Init, &[]);
        let model = ActorCritic::new(4, &config.ppo.hidden_sizes, 3, &mut init);
        let opt = PpoOptimizer::new(&model, &config.ppo);
        let slots = (0..config.ppo.n_envs as u64)
            .map(|e| {
                let nav = NoisyNav::new(
                    config.env.clone(),
                    config.noise,
                    config.filter.clone(),
                    stream(seed, StreamKind::Env, &[e]),
                    stream(seed, StreamKind::Noise, &[e]),
                )?;
                EnvSlot::new(nav)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            model,
            opt,
            slots,
            buffer: RolloutBuffer::default(),
            policy_rng: stream(seed, StreamKind::Policy, &[]),
            shuffle_rng: stream(seed, StreamKind::Shuffle, &[]),
            timesteps: 0,
            updates_done: 0,
            window: VecDeque::with_capacity(WINDOW),
            log: TrainLog::default(),
            config,
            seed,
        })
    }

    pub fn is_done(&self) -> bool {
        self.updates_done >= self.config.ppo.num_updates()
    }

    pub fn updates_done(&self) -> usize {
        self.updates_done
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn policy(&self) -> &ActorCritic<f32> {
        &self.model
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn into_parts(self) -> (ActorCritic<f32>, TrainLog) {
        (self.model, self.log)
    }

    pub fn run_update(&mut self) -> Result<UpdateStats, PpoError> {
        let ppo = &self.config.ppo;
        let finished = collect_rollout(
            &self.model,
            &mut self.slots,
            &mut self.buffer,
            ppo.rollout_length,
            ppo.reward_scale,
            self.timesteps,
            &mut self.policy_rng,
        )?;
        self.timesteps += ppo.rollout_length * ppo.n_envs;
        let last = self.log.updates.last();
        for ep in finished {
            if self.window.len() == WINDOW {
                self.window.pop_front();
            }
            self.window.push_back((ep.ep_return, ep.ep_len));
            let k = self.window.len() as f64;
            self.log.episodes.push(EpisodeRow {
                step: ep.step,
                episode: self.log.episodes.len(),
                ep_return: ep.ep_return,
                ep_len: ep.ep_len,
                mean100_return: self.window.iter().map(|w| w.0).sum::<f64>() / k,
                mean100_len: self.window.iter().map(|w| w.1 as f64).sum::<f64>() / k,
                policy_loss: last.map(|u| u.policy_loss),
                value_loss: last.map(|u| u.value_loss),
                clip_frac: last.map(|u| u.clip_frac),
                outcome: ep.outcome,
            });
        }
        self.buffer.compute_advantages(ppo.gamma as f32, ppo.gae_lambda as f32);
        let stats = ppo_update(&mut self.model, &mut self.opt, &self.buffer, ppo, &mut self.shuffle_rng)?;
        self.log.updates.push(stats);
        self.updates_done += 1;
        Ok(stats)
    }
}

/// Train to completion.
pub fn train(config: TrainConfig, seed: u64) -> Result<(ActorCritic<f32>, TrainLog), PpoError> {
    let mut t = Trainer::new(config, seed)?;
    while !t.is_done() {
        t.run_update()?;
    }
    Ok(t.into_parts())
}
