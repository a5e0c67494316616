//! Seeded evaluation of a policy over batches of episodes.

use std::path::Path;

use navlab_core::env::{Action, DoneReason, EnvConfig, Obstacle, Observation, Point};
use navlab_core::filters::{DenoiserKind, FilterConfig};
use navlab_core::nn::{load_policy, ActorCritic, NnError};
use navlab_core::noise::NoiseSpec;
use navlab_core::pipeline::{NoisyNav, PipelineError};
use navlab_core::rng::{stream, Stream, StreamKind};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("checkpoint not found: {0}")]
    CheckpointNotFound(String),
    #[error("cannot load checkpoint {path}: {source}")]
    Checkpoint { path: String, source: NnError },
    #[error("checkpoint {path} expects {expected} observations and {actions} actions; the environment uses 4 and 3")]
    ShapeMismatch { path: String, expected: usize, actions: usize },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Maps an observation to an action. `rng` is the episode's policy stream;
/// deterministic policies ignore it.
pub trait Policy: Sync {
    fn act(&self, obs: &Observation, rng: &mut Stream) -> Result<Action, NnError>;
}

/// The trained actor's mean action.
#[derive(Clone, Debug)]
pub struct MeanPolicy(pub ActorCritic<f32>);

impl Policy for MeanPolicy {
    fn act(&self, obs: &Observation, _: &mut Stream) -> Result<Action, NnError> {
        Ok(Action::from_slice(&self.0.mean_action(&obs.to_f32())?))
    }
}

/// The trained actor, sampling from its Gaussian head.
#[derive(Clone, Debug)]
pub struct SampledPolicy(pub ActorCritic<f32>);

impl Policy for SampledPolicy {
    fn act(&self, obs: &Observation, rng: &mut Stream) -> Result<Action, NnError> {
        Ok(Action::from_slice(&self.0.act(&obs.to_f32(), rng)?.action))
    }
}

/// Full speed along the observed goal vector.
#[derive(Clone, Copy, Debug)]
pub struct StraightToGoal;

impl Policy for StraightToGoal {
    fn act(&self, obs: &Observation, _: &mut Stream) -> Result<Action, NnError> {
        Ok(Action::new(obs.dx_goal, obs.dy_goal, 1.0))
    }
}

/// Flies straight to the goal when it starts at or above the centerline
/// (`dy_goal <= 0`), otherwise hovers until timeout. With no obstacles and
/// no noise, succeeds on exactly half of the spawn distribution.
#[derive(Clone, Copy, Debug)]
pub struct UpperHalfOnly;

impl Policy for UpperHalfOnly {
    fn act(&self, obs: &Observation, _: &mut Stream) -> Result<Action, NnError> {
        if obs.dy_goal <= 0.0 {
            Ok(Action::new(obs.dx_goal, obs.dy_goal, 1.0))
        } else {
            Ok(Action::new(0.0, 0.0, -1.0))
        }
    }
}

/// Loads a checkpoint, distinguishing a missing file from a corrupt one.
pub fn load_checkpoint(path: &Path) -> Result<ActorCritic<f32>, EvalError> {
    if !path.is_file() {
        return Err(EvalError::CheckpointNotFound(path.display().to_string()));
    }
    let model = load_policy(path).map_err(|source| EvalError::Checkpoint { path: path.display().to_string(), source })?;
    if model.obs_dim() != 4 || model.act_dim() != 3 {
        return Err(EvalError::ShapeMismatch {
            path: path.display().to_string(),
            expected: model.obs_dim(),
            actions: model.act_dim(),
        });
    }
    Ok(model)
}

/// One recorded step. The first record of an episode is the reset state,
/// with a zero action and reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub true_pos: Point,
    pub measured: Point,
    pub estimate: Point,
    pub action: Action,
    pub reward: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeResult {
    pub outcome: DoneReason,
    pub ep_return: f64,
    pub length: usize,
    /// Steps ending closer than `eps_safe` to an obstacle surface.
    pub unsafe_steps: usize,
    pub goal: Point,
    pub obstacles: Vec<Obstacle>,
}

/// Play one episode to termination, optionally recording every step.
pub fn run_episode(
    policy: &dyn Policy,
    nav: &mut NoisyNav,
    policy_rng: &mut Stream,
    mut record: Option<&mut Vec<TrajectoryStep>>,
) -> Result<EpisodeResult, EvalError> {
    let mut sensed = nav.reset()?;
    let state = nav.state().expect("reset sets the state");
    let (goal, obstacles) = (state.goal, state.obstacles.clone());
    if let Some(rec) = record.as_deref_mut() {
        rec.push(TrajectoryStep {
            true_pos: state.pos,
            measured: sensed.measured,
            estimate: sensed.estimate,
            action: Action::default(),
            reward: 0.0,
        });
    }
    let eps_safe = nav.env.eps_safe;
    let (mut ep_return, mut length, mut unsafe_steps) = (0.0, 0, 0);
    loop {
        let action = policy.act(&sensed.observation, policy_rng)?.clamped();
        let (next, out) = nav.step(action)?;
        ep_return += out.reward;
        length += 1;
        if out.info.dist_to_nearest_obstacle < eps_safe {
            unsafe_steps += 1;
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(TrajectoryStep {
                true_pos: out.info.true_pos,
                measured: next.measured,
                estimate: next.estimate,
                action,
                reward: out.reward,
            });
        }
        if out.terminal {
            return Ok(EpisodeResult { outcome: out.done_reason, ep_return, length, unsafe_steps, goal, obstacles });
        }
        sensed = next;
    }
}

/// Identifies one evaluation cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellKey {
    pub mu: f64,
    pub sigma: f64,
    pub denoiser: DenoiserKind,
}

impl CellKey {
    pub fn new(mu: f64, sigma: f64, denoiser: DenoiserKind) -> Self {
        Self { mu, sigma, denoiser }
    }

    fn path(&self, episode: usize) -> [u64; 4] {
        let d = DenoiserKind::ALL.iter().position(|&k| k == self.denoiser).unwrap() as u64;
        [self.mu.to_bits(), self.sigma.to_bits(), d, episode as u64]
    }

    /// Streams for `episode`. The layout stream depends only on the episode,
    /// so every cell of a sweep sees the same environments.
    pub fn streams(&self, seed: u64, episode: usize) -> (Stream, Stream, Stream) {
        let path = self.path(episode);
        (
            stream(seed, StreamKind::Env, &[episode as u64]),
            stream(seed, StreamKind::Noise, &path),
            stream(seed, StreamKind::Policy, &path),
        )
    }
}

/// Outcome counts for one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub mu: f64,
    pub sigma: f64,
    pub denoiser: DenoiserKind,
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub mean_return: f64,
    pub mean_length: f64,
    /// Fraction of steps within `eps_safe` of an obstacle; not persisted.
    pub unsafe_fraction: Option<f64>,
}

impl CellResult {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }

    pub fn key(&self) -> CellKey {
        CellKey::new(self.mu, self.sigma, self.denoiser)
    }

    /// Binomial standard error of the success rate.
    pub fn std_err(&self) -> f64 {
        let p = self.success_rate();
        (p * (1.0 - p) / self.episodes as f64).sqrt()
    }
}

/// Evaluate `episodes` seeded episodes of `policy` in one noise/denoiser cell.
pub fn evaluate_cell(
    policy: &dyn Policy,
    env: &EnvConfig,
    filter: &FilterConfig,
    key: CellKey,
    episodes: usize,
    seed: u64,
) -> Result<CellResult, EvalError> {
    let filter = FilterConfig { kind: key.denoiser, ..filter.clone() };
    let noise = NoiseSpec::new(key.mu, key.sigma);
    let results: Vec<EpisodeResult> = (0..episodes)
        .into_par_iter()
        .map(|ep| {
            let (env_rng, noise_rng, mut policy_rng) = key.streams(seed, ep);
            let mut nav = NoisyNav::new(env.clone(), noise, filter.clone(), env_rng, noise_rng)?;
            run_episode(policy, &mut nav, &mut policy_rng, None)
        })
        .collect::<Result<_, _>>()?;
    let count = |r: DoneReason| results.iter().filter(|e| e.outcome == r).count();
    let steps: usize = results.iter().map(|e| e.length).sum();
    let n = episodes.max(1) as f64;
    Ok(CellResult {
        mu: key.mu,
        sigma: key.sigma,
        denoiser: key.denoiser,
        episodes,
        successes: count(DoneReason::Success),
        collisions: count(DoneReason::Collision),
        timeouts: count(DoneReason::Timeout),
        mean_return: results.iter().map(|e| e.ep_return).sum::<f64>() / n,
        mean_length: steps as f64 / n,
        unsafe_fraction: Some(results.iter().map(|e| e.unsafe_steps).sum::<usize>() as f64 / steps.max(1) as f64),
    })
}

/// `|p_a - p_b| / sqrt(p(1-p)(1/n_a + 1/n_b))` with the pooled proportion
/// `p`. Returns 0 when both rates are 0 or both are 1.
pub fn pooled_z(a: &CellResult, b: &CellResult) -> f64 {
    let (na, nb) = (a.episodes as f64, b.episodes as f64);
    let p = (a.successes + b.successes) as f64 / (na + nb);
    let se = (p * (1.0 - p) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (a.success_rate() - b.success_rate()) / se
}

/// C-style `%.9g`.
pub fn fmt_g9(v: f64) -> String {
    fmt_g(v, 9)
}

fn fmt_g(v: f64, precision: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", precision - 1, v);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= precision as i32 {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (precision as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (0.30000000000000004, "0.3"),
            (-1234.5678, "-1234.5678"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (2.0 / 3.0, "0.666666667"),
            (-812.3456789012, "-812.345679"),
        ];
        for (v, s) in cases {
            assert_eq!(fmt_g9(v), s, "{v}");
        }
    }

    #[test]
    fn pooled_z_is_symmetric_and_zero_on_ties() {
        let cell = |s| CellResult {
            mu: 0.0,
            sigma: 0.0,
            denoiser: DenoiserKind::None,
            episodes: 100,
            successes: s,
            collisions: 0,
            timeouts: 100 - s,
            mean_return: 0.0,
            mean_length: 0.0,
            unsafe_fraction: None,
        };
        assert_eq!(pooled_z(&cell(40), &cell(40)), 0.0);
        assert_eq!(pooled_z(&cell(0), &cell(0)), 0.0);
        // p = 0.5, se = sqrt(0.25 * 0.02) = 0.0707...
        let z = pooled_z(&cell(60), &cell(40));
        assert!((z - 0.2 / (0.25f64 * 0.02).sqrt()).abs() < 1e-12);
        assert_eq!(pooled_z(&cell(40), &cell(60)), -z);
    }
}
