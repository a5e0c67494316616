//! Experiment driver for noisy UAV waypoint navigation: configuration,
//! seeded evaluation, noise sweeps, plotting and trajectory replay.

pub mod config;
pub mod eval;
pub mod sweep;
pub mod plot;
pub mod replay;
pub mod selftest;
