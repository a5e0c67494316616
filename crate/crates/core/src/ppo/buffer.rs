use crate::nn::Scalar;

/// On-policy transitions, stored step-major: record `t * n_envs + e` is
/// step `t` of environment `e`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    pub n_envs: usize,
    pub observations: Vec<[f32; 4]>,
    /// Unclamped policy samples.
    pub actions: Vec<[f32; 3]>,
    pub log_probs: Vec<f32>,
    pub values: Vec<f32>,
    pub rewards: Vec<f32>,
    /// The transition ended its episode.
    pub dones: Vec<bool>,
    /// Value of the observation following the last stored step, per env.
    pub last_values: Vec<f32>,
    pub advantages: Vec<f32>,
    pub returns: Vec<f32>,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, capacity: usize) -> Self {
        Self {
            n_envs,
            observations: Vec::with_capacity(capacity),
            actions: Vec::with_capacity(capacity),
            log_probs: Vec::with_capacity(capacity),
            values: Vec::with_capacity(capacity),
            rewards: Vec::with_capacity(capacity),
            dones: Vec::with_capacity(capacity),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn push(&mut self, obs: [f32; 4], action: [f32; 3], log_prob: f32, value: f32, reward: f32, done: bool) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    /// Fill `advantages` and `returns` with GAE(λ), per environment.
    pub fn compute_advantages(&mut self, gamma: f32, lambda: f32) {
        let n = self.n_envs;
        assert_eq!(self.len() % n, 0, "ragged buffer");
        assert_eq!(self.last_values.len(), n, "missing bootstrap values");
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for e in 0..n {
            let idx: Vec<usize> = (e..self.len()).step_by(n).collect();
            let rewards: Vec<f32> = idx.iter().map(|&i| self.rewards[i]).collect();
            let values: Vec<f32> = idx.iter().map(|&i| self.values[i]).collect();
            let dones: Vec<bool> = idx.iter().map(|&i| self.dones[i]).collect();
            let (adv, ret) = compute_gae(&rewards, &values, &dones, self.last_values[e], gamma, lambda);
            for (k, &i) in idx.iter().enumerate() {
                self.advantages[i] = adv[k];
                self.returns[i] = ret[k];
            }
        }
    }
}

/// GAE(λ) over one environment's trajectory segment.
///
/// `dones[t]` marks that transition `t` ended an episode, which zeroes both
/// the bootstrap and the recursion across the boundary. `last_value` is the
/// value of the observation after the final step, used when the segment is
/// truncated mid-episode. Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae<T: Scalar>(
    rewards: &[T],
    values: &[T],
    dones: &[bool],
    last_value: T,
    gamma: T,
    lambda: T,
) -> (Vec<T>, Vec<T>) {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n);
    let mut adv = vec![T::zero(); n];
    let mut gae = T::zero();
    for t in (0..n).rev() {
        let not_done = if dones[t] { T::zero() } else { T::one() };
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let delta = rewards[t] + gamma * next_value * not_done - values[t];
        gae = delta + gamma * lambda * not_done * gae;
        adv[t] = gae;
    }
    let ret = adv.iter().zip(values).map(|(&a, &v)| a + v).collect();
    (adv, ret)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [1.0f64, -2.0, 0.5, 3.0];
        let v = [0.2, 0.4, -0.1, 0.7];
        let d = [false, true, false, false];
        let last = 1.5;
        let g = 0.9;
        let (adv, ret) = compute_gae(&r, &v, &d, last, g, 0.0);
        for t in 0..4 {
            let next = if t + 1 < 4 { v[t + 1] } else { last };
            let mask = if d[t] { 0.0 } else { 1.0 };
            assert_eq!(adv[t], r[t] + g * next * mask - v[t]);
            assert_eq!(ret[t], adv[t] + v[t]);
        }
    }

    #[test]
    fn lambda_one_gamma_one_is_monte_carlo() {
        let r = [1.0f64, 2.0, 3.0, 4.0, 5.0];
        let v = [0.5, -0.5, 1.0, 2.0, 0.0];
        let d = [false, false, true, false, true];
        let (adv, _) = compute_gae(&r, &v, &d, 99.0, 1.0, 1.0);
        let expected = [6.0 - 0.5, 5.0 + 0.5, 3.0 - 1.0, 9.0 - 2.0, 5.0];
        for t in 0..5 {
            assert!((adv[t] - expected[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn multi_env_buffer_is_strided() {
        let mut b = RolloutBuffer::new(2, 4);
        // env 0 rewards 1, 2; env 1 rewards 10, 20 (terminal at the end).
        b.push([0.0; 4], [0.0; 3], 0.0, 0.0, 1.0, false);
        b.push([0.0; 4], [0.0; 3], 0.0, 0.0, 10.0, false);
        b.push([0.0; 4], [0.0; 3], 0.0, 0.0, 2.0, false);
        b.push([0.0; 4], [0.0; 3], 0.0, 0.0, 20.0, true);
        b.last_values = vec![100.0, 100.0];
        b.compute_advantages(1.0, 1.0);
        assert_eq!(b.advantages, vec![103.0, 30.0, 102.0, 20.0]);
    }
}
