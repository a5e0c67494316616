//! Gaussian localization noise.
//!
//! Noise is applied to the self-position estimate once per control step;
//! goal and hazard offsets are then recomputed from the noisy position, so
//! both share the same `(η_x, η_y)` draw.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{observe_from, EnvConfig, Observation, Point, SimState};

/// Per-axis law `N(mu, sigma)` of the additive position error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mu: f64,
    pub sigma: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { mu: 0.0, sigma: 0.0 };

    pub fn new(mu: f64, sigma: f64) -> Self {
        assert!(sigma >= 0.0 && sigma.is_finite() && mu.is_finite(), "invalid noise law N({mu}, {sigma})");
        Self { mu, sigma }
    }

    /// Law of the sum of two independent noises: means add, variances add.
    pub fn compose(self, injected: NoiseSpec) -> NoiseSpec {
        NoiseSpec {
            mu: self.mu + injected.mu,
            sigma: self.sigma.hypot(injected.sigma),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.mu == 0.0 && self.sigma == 0.0
    }
}

/// `noise` config section: sensor noise plus optionally injected noise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub mu: f64,
    pub sigma: f64,
    pub injected_mu: f64,
    pub injected_sigma: f64,
}

impl NoiseConfig {
    pub fn effective(&self) -> NoiseSpec {
        NoiseSpec::new(self.mu, self.sigma).compose(NoiseSpec::new(self.injected_mu, self.injected_sigma))
    }
}

/// `x̂ = x + η_x`, `ŷ = y + η_y` with independent draws. The x draw is
/// taken before the y draw.
pub fn perturb_position<R: Rng + ?Sized>(true_pos: Point, spec: &NoiseSpec, rng: &mut R) -> Point {
    let ex: f64 = rng.sample(StandardNormal);
    let ey: f64 = rng.sample(StandardNormal);
    Point::new(
        true_pos.x + (spec.mu + spec.sigma * ex),
        true_pos.y + (spec.mu + spec.sigma * ey),
    )
}

/// Draw a noisy position and recompute the observation from it. Returns the
/// measured position alongside the perturbed observation.
pub fn perturb_observation<R: Rng + ?Sized>(
    state: &SimState,
    spec: &NoiseSpec,
    rng: &mut R,
    config: &EnvConfig,
) -> (Point, Observation) {
    let measured = perturb_position(state.pos, spec, rng);
    (measured, observe_from(measured, state.goal, &state.obstacles, config))
}
