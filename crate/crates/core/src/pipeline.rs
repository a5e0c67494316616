//! The per-step sensing loop: true position → noisy measurement → denoised
//! estimate → observation. Reward and termination come from the true state.

use thiserror::Error;

use crate::env::{self, Action, EnvConfig, EnvError, Observation, Point, SimState, StepOutcome};
use crate::filters::{Denoiser, FilterConfig, FilterError};
use crate::noise::{perturb_position, NoiseSpec};
use crate::rng::Stream;

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("no episode in progress; call reset first")]
    NotReset,
}

/// What the policy gets to see at one step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sensed {
    pub measured: Point,
    pub estimate: Point,
    pub observation: Observation,
}

/// One environment instance seen through noisy, optionally denoised,
/// localization. Owns its environment and noise streams.
#[derive(Clone, Debug)]
pub struct NoisyNav {
    pub env: EnvConfig,
    pub noise: NoiseSpec,
    pub filter: FilterConfig,
    env_rng: Stream,
    noise_rng: Stream,
    state: Option<SimState>,
    denoiser: Denoiser,
    prev_command: Point,
}

impl NoisyNav {
    pub fn new(
        env: EnvConfig,
        noise: NoiseSpec,
        filter: FilterConfig,
        env_rng: Stream,
        noise_rng: Stream,
    ) -> Result<Self, PipelineError> {
        env.validate()?;
        let denoiser = Denoiser::new(filter.kind, &filter, env.dt, noise.sigma)?;
        Ok(Self { env, noise, filter, env_rng, noise_rng, state: None, denoiser, prev_command: Point::ZERO })
    }

    pub fn state(&self) -> Option<&SimState> {
        self.state.as_ref()
    }

    fn sense(&mut self) -> Result<Sensed, PipelineError> {
        let state = self.state.as_ref().ok_or(PipelineError::NotReset)?;
        let measured = perturb_position(state.pos, &self.noise, &mut self.noise_rng);
        let estimate = self.denoiser.step(measured, self.prev_command, self.env.dt)?;
        let observation = env::observe_from(estimate, state.goal, &state.obstacles, &self.env);
        Ok(Sensed { measured, estimate, observation })
    }

    pub fn reset(&mut self) -> Result<Sensed, PipelineError> {
        let (state, _) = env::reset(&self.env, &mut self.env_rng)?;
        self.state = Some(state);
        self.denoiser = Denoiser::new(self.filter.kind, &self.filter, self.env.dt, self.noise.sigma)?;
        self.prev_command = Point::ZERO;
        self.sense()
    }

    /// Apply `action` to the true state and sense the result. After a
    /// terminal step the returned observation is still computed (from the
    /// terminal state) but the episode must be reset before stepping again.
    pub fn step(&mut self, action: Action) -> Result<(Sensed, StepOutcome), PipelineError> {
        let state = self.state.as_mut().ok_or(PipelineError::NotReset)?;
        let outcome = env::step(state, action, &self.env)?;
        self.prev_command = outcome.info.velocity;
        let sensed = self.sense()?;
        Ok((sensed, outcome))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::DenoiserKind;
    use crate::rng::{stream, StreamKind};

    fn nav(noise: NoiseSpec, kind: DenoiserKind) -> NoisyNav {
        let filter = FilterConfig { kind, ..FilterConfig::default() };
        NoisyNav::new(
            EnvConfig::default(),
            noise,
            filter,
            stream(1, StreamKind::Env, &[]),
            stream(1, StreamKind::Noise, &[]),
        )
        .unwrap()
    }

    #[test]
    fn noiseless_pipeline_sees_truth() {
        let mut n = nav(NoiseSpec::NONE, DenoiserKind::None);
        let s = n.reset().unwrap();
        assert_eq!(s.observation, env::observe(n.state().unwrap(), &n.env));
        let (s, out) = n.step(Action::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(s.observation, out.observation);
        assert_eq!(s.measured, out.info.true_pos);
    }

    #[test]
    fn step_before_reset_fails() {
        let mut n = nav(NoiseSpec::NONE, DenoiserKind::None);
        assert_eq!(n.step(Action::default()).unwrap_err(), PipelineError::NotReset);
    }

    #[test]
    fn noise_never_touches_reward() {
        let mut clean = nav(NoiseSpec::NONE, DenoiserKind::None);
        let mut noisy = nav(NoiseSpec::new(0.2, 0.7), DenoiserKind::Kalman);
        clean.reset().unwrap();
        noisy.reset().unwrap();
        for i in 0..50 {
            let a = Action::new(1.0, (i as f64 * 0.3).sin(), 0.5);
            let (_, oc) = clean.step(a).unwrap();
            let (_, on) = noisy.step(a).unwrap();
            assert_eq!(oc.reward, on.reward);
            assert_eq!(oc.info.true_pos, on.info.true_pos);
            if oc.terminal {
                break;
            }
        }
    }
}
