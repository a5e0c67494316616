use rand::seq::SliceRandom;
use rand::Rng;

use super::{PpoConfig, PpoError, RolloutBuffer};
use crate::nn::{Adam, ActorCritic, Scalar};

/// Training tensors for one minibatch, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Minibatch<T> {
    pub obs: Vec<T>,
    pub actions: Vec<T>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T> Minibatch<T> {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }
}

impl Minibatch<f32> {
    pub fn gather(buffer: &RolloutBuffer, indices: &[usize]) -> Self {
        let mut mb = Minibatch {
            obs: Vec::with_capacity(indices.len() * 4),
            actions: Vec::with_capacity(indices.len() * 3),
            old_log_probs: Vec::with_capacity(indices.len()),
            advantages: Vec::with_capacity(indices.len()),
            returns: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            mb.obs.extend_from_slice(&buffer.observations[i]);
            mb.actions.extend_from_slice(&buffer.actions[i]);
            mb.old_log_probs.push(buffer.log_probs[i]);
            mb.advantages.push(buffer.advantages[i]);
            mb.returns.push(buffer.returns[i]);
        }
        mb
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub actor: Vec<T>,
    pub critic: Vec<T>,
    pub log_std: Vec<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &ActorCritic<T>) -> Self {
        Self {
            actor: vec![T::zero(); model.actor.num_params()],
            critic: vec![T::zero(); model.critic.num_params()],
            log_std: vec![T::zero(); model.head.log_std.len()],
        }
    }

    fn iter(&self) -> impl Iterator<Item = &T> {
        self.actor.iter().chain(&self.critic).chain(&self.log_std)
    }

    pub fn norm(&self) -> f64 {
        self.iter().map(|g| g.to_f64().unwrap().powi(2)).sum::<f64>().sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, k: T) {
        for g in self.actor.iter_mut().chain(&mut self.critic).chain(&mut self.log_std) {
            *g = *g * k;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MinibatchStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total_loss: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    /// `max |ratio - 1|` over the minibatch.
    pub max_ratio_deviation: f64,
}

/// Loss and exact gradients for one minibatch:
///
/// `L = -mean(min(ρÂ, clip(ρ, 1-ε, 1+ε)Â)) + c_v·mean((V - R)²) - c_e·H`
///
/// with `ρ = exp(log π(a|s) - log π_old(a|s))`. Advantages are normalized
/// within the minibatch when enabled and the minibatch has more than one
/// sample.
pub fn minibatch_gradients<T: Scalar>(
    model: &ActorCritic<T>,
    mb: &Minibatch<T>,
    cfg: &PpoConfig,
) -> Result<(MinibatchStats, Gradients<T>), PpoError> {
    let n = mb.len();
    let act_dim = model.act_dim();
    let nf = T::lit(n as f64);
    let eps = T::lit(cfg.clip_eps);
    let (lo, hi) = (T::one() - eps, T::one() + eps);

    let mut adv = mb.advantages.clone();
    if cfg.normalize_advantage && n > 1 {
        let mean = adv.iter().fold(T::zero(), |a, &b| a + b) / nf;
        let var = adv.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / T::lit((n - 1) as f64);
        let denom = var.sqrt() + T::lit(1e-8);
        adv.iter_mut().for_each(|a| *a = (*a - mean) / denom);
    }

    let mut grads = Gradients::zeros_like(model);
    let log_std = &model.head.log_std;
    let inv_var: Vec<T> = log_std.iter().map(|&ls| (-(ls + ls)).exp()).collect();

    // Policy term.
    let actor_cache = model.actor.forward_batch(&mb.obs, n)?;
    let means = actor_cache.output();
    let mut mean_grad = vec![T::zero(); n * act_dim];
    let mut policy_loss = T::zero();
    let (mut clipped, mut kl, mut max_dev) = (0usize, T::zero(), T::zero());
    for i in 0..n {
        let m = &means[i * act_dim..(i + 1) * act_dim];
        let a = &mb.actions[i * act_dim..(i + 1) * act_dim];
        let log_ratio = model.head.log_prob(m, a) - mb.old_log_probs[i];
        let ratio = log_ratio.exp();
        let surr = ratio * adv[i];
        let surr_clipped = ratio.max(lo).min(hi) * adv[i];
        policy_loss = policy_loss - surr.min(surr_clipped);
        if (ratio - T::one()).abs() > eps {
            clipped += 1;
        }
        kl = kl + (ratio - T::one()) - log_ratio;
        max_dev = max_dev.max((ratio - T::one()).abs());

        // The clipped branch is constant in θ; only the unclipped branch
        // carries gradient when it attains the minimum.
        if surr <= surr_clipped {
            let dlogp = -ratio * adv[i] / nf;
            for j in 0..act_dim {
                let diff = a[j] - m[j];
                mean_grad[i * act_dim + j] = dlogp * diff * inv_var[j];
                grads.log_std[j] = grads.log_std[j] + dlogp * (diff * diff * inv_var[j] - T::one());
            }
        }
    }
    policy_loss = policy_loss / nf;
    model.actor.backward(&actor_cache, &mean_grad, &mut grads.actor)?;

    // Entropy bonus (state-independent, d H / d log_std_j = 1).
    let entropy = model.head.entropy();
    let ent_coeff = T::lit(cfg.entropy_coeff);
    grads.log_std.iter_mut().for_each(|g| *g = *g - ent_coeff);

    // Value term.
    let critic_cache = model.critic.forward_batch(&mb.obs, n)?;
    let values = critic_cache.output();
    let vc = T::lit(cfg.value_coeff);
    let two = T::lit(2.0);
    let mut value_loss = T::zero();
    let mut value_grad = vec![T::zero(); n];
    for i in 0..n {
        let e = values[i] - mb.returns[i];
        value_loss = value_loss + e * e;
        value_grad[i] = vc * two * e / nf;
    }
    value_loss = value_loss / nf;
    model.critic.backward(&critic_cache, &value_grad, &mut grads.critic)?;

    let total = policy_loss + vc * value_loss - ent_coeff * entropy;
    let f = |v: T| v.to_f64().unwrap();
    let stats = MinibatchStats {
        policy_loss: f(policy_loss),
        value_loss: f(value_loss),
        entropy: f(entropy),
        total_loss: f(total),
        clip_frac: clipped as f64 / n as f64,
        approx_kl: f(kl) / n as f64,
        max_ratio_deviation: f(max_dev),
    };
    if !(stats.total_loss.is_finite()) {
        return Err(PpoError::NonFiniteLoss {
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
        });
    }
    Ok((stats, grads))
}

/// One Adam state per parameter group; equivalent to a single Adam over the
/// concatenation since the update is elementwise.
#[derive(Clone, Debug)]
pub struct PpoOptimizer {
    actor: Adam<f32>,
    critic: Adam<f32>,
    log_std: Adam<f32>,
}

impl PpoOptimizer {
    pub fn new(model: &ActorCritic<f32>, cfg: &PpoConfig) -> Self {
        Self {
            actor: Adam::new(model.actor.num_params(), cfg.adam),
            critic: Adam::new(model.critic.num_params(), cfg.adam),
            log_std: Adam::new(model.head.log_std.len(), cfg.adam),
        }
    }

    /// Clip the global gradient norm to `max_norm`, then step. Returns the
    /// pre-clipping norm.
    pub fn apply(&mut self, model: &mut ActorCritic<f32>, grads: &mut Gradients<f32>, max_norm: f64) -> Result<f64, PpoError> {
        if !grads.all_finite() {
            let index = grads.actor.iter().chain(&grads.critic).chain(&grads.log_std).position(|g| !g.is_finite()).unwrap();
            return Err(crate::nn::NnError::NonFiniteGradient { index }.into());
        }
        let norm = grads.norm();
        let k = max_norm / (norm + 1e-6);
        if k < 1.0 {
            grads.scale(k as f32);
        }
        self.actor.step(model.actor.params_mut(), &grads.actor)?;
        self.critic.step(model.critic.params_mut(), &grads.critic)?;
        self.log_std.step(&mut model.head.log_std, &grads.log_std)?;
        Ok(norm)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_frac: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    /// `max |ratio - 1|` on the first minibatch, before any parameter change.
    pub first_max_ratio_deviation: f64,
    pub first_clip_frac: f64,
    pub minibatches: usize,
}

/// `epochs_per_update` passes of shuffled minibatches over `buffer`, which
/// must already carry advantages and returns. Losses in the returned stats
/// are averages over all minibatches. On error, `model` and `opt` are left
/// as they were before the call.
pub fn ppo_update<R: Rng + ?Sized>(
    model: &mut ActorCritic<f32>,
    opt: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    let saved = (model.clone(), opt.clone());
    let res = update_epochs(model, opt, buffer, cfg, rng);
    if res.is_err() {
        (*model, *opt) = saved;
    }
    res
}

fn update_epochs<R: Rng + ?Sized>(
    model: &mut ActorCritic<f32>,
    opt: &mut PpoOptimizer,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PpoError> {
    assert_eq!(buffer.advantages.len(), buffer.len(), "advantages not computed");
    let mut indices: Vec<usize> = (0..buffer.len()).collect();
    let mut stats = UpdateStats::default();
    let mb_size = cfg.minibatch_size.min(buffer.len()).max(1);
    for _ in 0..cfg.epochs_per_update {
        indices.shuffle(rng);
        for chunk in indices.chunks(mb_size) {
            let mb = Minibatch::gather(buffer, chunk);
            let (s, mut g) = minibatch_gradients(model, &mb, cfg)?;
            if stats.minibatches == 0 {
                stats.first_max_ratio_deviation = s.max_ratio_deviation;
                stats.first_clip_frac = s.clip_frac;
            }
            stats.grad_norm += opt.apply(model, &mut g, cfg.max_grad_norm)?;
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.entropy += s.entropy;
            stats.clip_frac += s.clip_frac;
            stats.approx_kl += s.approx_kl;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_frac /= k;
    stats.approx_kl /= k;
    stats.grad_norm /= k;
    Ok(stats)
}
