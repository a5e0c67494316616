use rand::Rng;
use rand_distr::StandardNormal;

use super::{Activation, Mlp, NnError, Scalar};

fn half_ln_2pi<T: Scalar>() -> T {
    T::lit(0.5 * (2.0 * std::f64::consts::PI).ln())
}

/// Diagonal Gaussian log-density.
pub fn gaussian_log_prob<T: Scalar>(mean: &[T], log_std: &[T], action: &[T]) -> T {
    debug_assert!(mean.len() == log_std.len() && mean.len() == action.len());
    let half = T::lit(0.5);
    mean.iter()
        .zip(log_std)
        .zip(action)
        .fold(T::zero(), |acc, ((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            acc - half * z * z - ls - half_ln_2pi()
        })
}

pub fn gaussian_entropy<T: Scalar>(log_std: &[T]) -> T {
    let c = T::lit(0.5) + half_ln_2pi();
    log_std.iter().fold(T::zero(), |acc, &ls| acc + ls + c)
}

pub fn gaussian_sample<T: Scalar, R: Rng + ?Sized>(mean: &[T], log_std: &[T], rng: &mut R) -> Vec<T> {
    mean.iter()
        .zip(log_std)
        .map(|(&m, &ls)| {
            let z: f64 = rng.sample(StandardNormal);
            m + ls.exp() * T::lit(z)
        })
        .collect()
}

/// State-independent log standard deviations, one per action dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHead<T> {
    pub log_std: Vec<T>,
}

impl<T: Scalar> GaussianHead<T> {
    pub fn new(dim: usize, init_log_std: f64) -> Self {
        Self { log_std: vec![T::lit(init_log_std); dim] }
    }

    pub fn log_prob(&self, mean: &[T], action: &[T]) -> T {
        gaussian_log_prob(mean, &self.log_std, action)
    }

    pub fn entropy(&self) -> T {
        gaussian_entropy(&self.log_std)
    }

    pub fn sample<R: Rng + ?Sized>(&self, mean: &[T], rng: &mut R) -> Vec<T> {
        gaussian_sample(mean, &self.log_std, rng)
    }
}

/// Output of one stochastic policy query.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyStep<T> {
    pub mean: Vec<T>,
    /// Unclamped sample; clamp at the environment boundary.
    pub action: Vec<T>,
    pub log_prob: T,
    pub value: T,
}

/// Separate actor (tanh-bounded means) and critic networks plus the
/// Gaussian exploration head.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub head: GaussianHead<T>,
}

impl<T: Scalar> ActorCritic<T> {
    pub const HIDDEN_GAIN: f64 = std::f64::consts::SQRT_2;
    pub const ACTOR_OUT_GAIN: f64 = 0.01;
    pub const CRITIC_OUT_GAIN: f64 = 1.0;

    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], act_dim: usize, rng: &mut R) -> Self {
        let sizes = |out: usize| {
            let mut s = vec![obs_dim];
            s.extend_from_slice(hidden);
            s.push(out);
            s
        };
        let gains = |out_gain: f64| {
            let mut g = vec![Self::HIDDEN_GAIN; hidden.len()];
            g.push(out_gain);
            g
        };
        let actor = Mlp::orthogonal(&sizes(act_dim), Activation::Tanh, Activation::Tanh, &gains(Self::ACTOR_OUT_GAIN), rng);
        let critic = Mlp::orthogonal(&sizes(1), Activation::Tanh, Activation::Identity, &gains(Self::CRITIC_OUT_GAIN), rng);
        Self { actor, critic, head: GaussianHead::new(act_dim, 0.0) }
    }

    pub fn from_parts(actor: Mlp<T>, critic: Mlp<T>, log_std: Vec<T>) -> Result<Self, NnError> {
        if log_std.len() != actor.output_dim() {
            return Err(NnError::ShapeMismatch { expected: actor.output_dim(), got: log_std.len() });
        }
        if critic.output_dim() != 1 || critic.input_dim() != actor.input_dim() {
            return Err(NnError::ShapeMismatch { expected: actor.input_dim(), got: critic.input_dim() });
        }
        Ok(Self { actor, critic, head: GaussianHead { log_std } })
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn act_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.actor.num_params() + self.critic.num_params() + self.head.log_std.len()
    }

    pub fn mean_action(&self, obs: &[T]) -> Result<Vec<T>, NnError> {
        self.actor.forward(obs)
    }

    pub fn value(&self, obs: &[T]) -> Result<T, NnError> {
        Ok(self.critic.forward(obs)?[0])
    }

    pub fn act<R: Rng + ?Sized>(&self, obs: &[T], rng: &mut R) -> Result<PolicyStep<T>, NnError> {
        let mean = self.mean_action(obs)?;
        let action = self.head.sample(&mean, rng);
        let log_prob = self.head.log_prob(&mean, &action);
        let value = self.value(obs)?;
        Ok(PolicyStep { mean, action, log_prob, value })
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite() && self.critic.all_finite() && self.head.log_std.iter().all(|v| v.is_finite())
    }
}
