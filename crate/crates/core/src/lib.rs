//! Simulation and learning substrate for studying DRL-based UAV waypoint
//! navigation under Gaussian localization noise.
//!
//! The crate is organized along the data flow of a single control step:
//!
//! - [`env`]: first-order 2D kinematics, episode generation, observation and
//!   the dense reward.
//! - [`noise`]: Gaussian perturbation of the self-localization estimate.
//! - [`filters`]: causal denoisers (Bessel low-pass biquad, Kalman filter).
//! - [`pipeline`]: ties the three together (true state → noisy → denoised
//!   observation).
//! - [`nn`]: dense MLP with exact reverse-mode gradients, Adam and the
//!   diagonal Gaussian policy head.
//! - [`ppo`]: rollout collection, GAE and the clipped-surrogate update.

pub mod env;
pub mod filters;
pub mod nn;
pub mod noise;
pub mod pipeline;
pub mod ppo;
pub mod rng;

pub use env::{Action, EnvConfig, Observation, Point, SimState};
pub use noise::NoiseSpec;
