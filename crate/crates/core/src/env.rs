//! 2D waypoint-navigation environment.
//!
//! The UAV is a point mass flying at constant altitude with first-order
//! kinematics (`ṗ = v`). Each episode spawns the UAV on the left edge of the
//! arena, places the goal on the right edge at the centerline, and scatters
//! circular obstacles between them. Reward and termination always use the
//! true position; measurement noise lives in [`crate::noise`].

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Attempts per obstacle before reset gives up on a layout.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("could not place obstacle {index} after {attempts} attempts; obstacle layout too dense")]
    PlacementFailed { index: usize, attempts: usize },
    #[error("step called on a finished episode ({0:?})")]
    EpisodeOver(DoneReason),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ZERO: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Reward constants of the dense reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    pub r_success: f64,
    pub r_fail: f64,
    pub r_dist_coeff: f64,
    pub r_major_penalty: f64,
    pub r_minor_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            r_success: 1000.0,
            r_fail: -1000.0,
            r_dist_coeff: 4.0,
            r_major_penalty: 5.0,
            r_minor_penalty: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Outer safety bound; breached first.
    pub r_minor: f64,
    /// Inner safety bound.
    pub r_major: f64,
    pub eps_success: f64,
    /// Reporting-only clearance threshold to the nearest obstacle.
    pub eps_safe: f64,
    pub obstacle_count_min: usize,
    pub obstacle_count_max: usize,
    pub obstacle_radius: f64,
    /// Std-dev of the obstacle y-placement law; `None` means `(y_max - y_min) / 6`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub obstacle_y_sigma: Option<f64>,
    pub v_max: f64,
    pub dt: f64,
    pub max_steps: usize,
    pub reward: RewardParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            x_min: 0.0,
            x_max: 5.0,
            y_min: -2.0,
            y_max: 2.0,
            z_min: 0.0,
            z_max: 1.0,
            r_minor: 0.2,
            r_major: 0.1,
            eps_success: 0.1,
            eps_safe: 0.2,
            obstacle_count_min: 1,
            obstacle_count_max: 3,
            obstacle_radius: 0.15,
            obstacle_y_sigma: None,
            v_max: 0.5,
            dt: 0.05,
            max_steps: 400,
            reward: RewardParams::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: &str| Err(EnvError::InvalidConfig(msg.to_string()));
        let all = [
            self.x_min, self.x_max, self.y_min, self.y_max, self.z_min, self.z_max, self.r_minor,
            self.r_major, self.eps_success, self.eps_safe, self.obstacle_radius, self.v_max, self.dt,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all lengths and rates must be finite");
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max && self.z_min < self.z_max) {
            return bad("arena bounds must satisfy min < max on every axis");
        }
        if !(0.0 < self.r_major && self.r_major < self.r_minor) {
            return bad("safety radii must satisfy 0 < r_major < r_minor");
        }
        if self.obstacle_count_min > self.obstacle_count_max {
            return bad("obstacle_count_min exceeds obstacle_count_max");
        }
        if !(self.eps_success > 0.0 && self.v_max > 0.0 && self.dt > 0.0 && self.max_steps > 0) {
            return bad("eps_success, v_max, dt and max_steps must be positive");
        }
        if self.obstacle_radius < 0.0 || self.obstacle_y_sigma() < 0.0 {
            return bad("obstacle radius and placement sigma must be non-negative");
        }
        if self.x_max - self.x_min <= 2.0 * self.r_minor || self.y_max - self.y_min <= 2.0 * self.r_minor {
            return bad("arena too small for the minor safety bound");
        }
        if 2.0 * self.obstacle_radius >= self.y_max - self.y_min {
            return bad("obstacles do not fit inside the arena");
        }
        let r = &self.reward;
        if !(r.r_success > 0.0
            && r.r_fail < 0.0
            && r.r_dist_coeff > 0.0
            && r.r_major_penalty > 0.0
            && r.r_minor_penalty > 0.0)
        {
            return bad("reward constants violate sign constraints");
        }
        Ok(())
    }

    pub fn obstacle_y_sigma(&self) -> f64 {
        self.obstacle_y_sigma
            .unwrap_or((self.y_max - self.y_min) / 6.0)
    }

    pub fn altitude(&self) -> f64 {
        0.5 * (self.z_min + self.z_max)
    }

    pub fn spawn_x(&self) -> f64 {
        self.x_min + self.r_minor
    }

    pub fn goal(&self) -> Point {
        Point::new(self.x_max - self.r_minor, 0.5 * (self.y_min + self.y_max))
    }

    pub fn contains(&self, p: Point) -> bool {
        (self.x_min..=self.x_max).contains(&p.x) && (self.y_min..=self.y_max).contains(&p.y)
    }

    fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(self.x_min, self.x_max), p.y.clamp(self.y_min, self.y_max))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: Point,
    pub radius: f64,
}

impl Obstacle {
    /// Signed distance from `p` to the obstacle surface (negative inside).
    pub fn surface_distance(&self, p: Point) -> f64 {
        p.distance(self.center) - self.radius
    }

    /// Point on the surface closest to `p`.
    pub fn closest_point(&self, p: Point) -> Point {
        let d = self.center - p;
        let n = d.norm();
        let dir = if n > 0.0 { d * (1.0 / n) } else { Point::new(1.0, 0.0) };
        self.center - dir * self.radius
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoneReason {
    Running,
    Success,
    Collision,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub pos: Point,
    pub goal: Point,
    pub obstacles: Vec<Obstacle>,
    pub step: usize,
    pub done_reason: DoneReason,
}

impl SimState {
    pub fn is_running(&self) -> bool {
        self.done_reason == DoneReason::Running
    }

    pub fn dist_to_goal(&self) -> f64 {
        self.pos.distance(self.goal)
    }

    /// Distance to the nearest obstacle surface, `+inf` without obstacles.
    pub fn dist_to_nearest_obstacle(&self) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.surface_distance(self.pos))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Goal and nearest-hazard offsets as seen from some position.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Observation {
    pub dx_goal: f64,
    pub dy_goal: f64,
    pub dx_obs: f64,
    pub dy_obs: f64,
}

impl Observation {
    pub fn to_array(self) -> [f64; 4] {
        [self.dx_goal, self.dy_goal, self.dx_obs, self.dy_obs]
    }

    pub fn to_f32(self) -> [f32; 4] {
        self.to_array().map(|v| v as f32)
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Raw network outputs; each component is meaningful in `[-1, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Action {
    pub vx_raw: f64,
    pub vy_raw: f64,
    pub vmag_raw: f64,
}

impl Action {
    pub const fn new(vx_raw: f64, vy_raw: f64, vmag_raw: f64) -> Self {
        Self { vx_raw, vy_raw, vmag_raw }
    }

    pub fn from_slice<T: Copy + Into<f64>>(a: &[T]) -> Self {
        Self::new(a[0].into(), a[1].into(), a[2].into())
    }

    pub fn clamped(self) -> Self {
        Self::new(
            self.vx_raw.clamp(-1.0, 1.0),
            self.vy_raw.clamp(-1.0, 1.0),
            self.vmag_raw.clamp(-1.0, 1.0),
        )
    }

    /// Realized velocity: unit direction of `(vx, vy)` scaled by the speed
    /// that `vmag_raw` maps to affinely on `[0, v_max]`. A zero direction
    /// yields zero velocity.
    pub fn velocity(self, v_max: f64) -> Point {
        let a = self.clamped();
        let n = a.vx_raw.hypot(a.vy_raw);
        if n == 0.0 {
            return Point::ZERO;
        }
        let speed = 0.5 * (a.vmag_raw + 1.0) * v_max;
        Point::new(a.vx_raw / n * speed, a.vy_raw / n * speed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wall {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HazardKind {
    Obstacle(usize),
    Wall(Wall),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hazard {
    pub kind: HazardKind,
    /// Signed surface distance (negative inside an obstacle or past a wall).
    pub distance: f64,
    /// Vector from the query position to the closest surface point.
    pub offset: Point,
}

/// Nearest hazard surface from `pos`. Ties go to the lowest index, with
/// obstacles ranked before walls.
pub fn nearest_hazard(pos: Point, obstacles: &[Obstacle], config: &EnvConfig) -> Hazard {
    let walls = [
        (Wall::Left, pos.x - config.x_min, Point::new(config.x_min - pos.x, 0.0)),
        (Wall::Right, config.x_max - pos.x, Point::new(config.x_max - pos.x, 0.0)),
        (Wall::Bottom, pos.y - config.y_min, Point::new(0.0, config.y_min - pos.y)),
        (Wall::Top, config.y_max - pos.y, Point::new(0.0, config.y_max - pos.y)),
    ];
    let candidates = obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| Hazard {
            kind: HazardKind::Obstacle(i),
            distance: o.surface_distance(pos),
            offset: o.closest_point(pos) - pos,
        })
        .chain(walls.into_iter().map(|(w, distance, offset)| Hazard {
            kind: HazardKind::Wall(w),
            distance,
            offset,
        }));
    let mut best: Option<Hazard> = None;
    for h in candidates {
        match best {
            Some(b) if b.distance <= h.distance => {}
            _ => best = Some(h),
        }
    }
    best.expect("walls are always candidates")
}

/// Observation measured from an arbitrary (possibly noisy) position.
pub fn observe_from(pos: Point, goal: Point, obstacles: &[Obstacle], config: &EnvConfig) -> Observation {
    let to_goal = goal - pos;
    let hazard = nearest_hazard(pos, obstacles, config);
    Observation {
        dx_goal: to_goal.x,
        dy_goal: to_goal.y,
        dx_obs: hazard.offset.x,
        dy_obs: hazard.offset.y,
    }
}

/// True observation.
pub fn observe(state: &SimState, config: &EnvConfig) -> Observation {
    observe_from(state.pos, state.goal, &state.obstacles, config)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BreachFlags {
    pub major: bool,
    pub minor: bool,
}

impl BreachFlags {
    pub fn at_distance(distance: f64, config: &EnvConfig) -> Self {
        Self {
            major: distance < config.r_major,
            minor: distance < config.r_minor,
        }
    }
}

/// Dense reward from the post-step state. Exactly one branch fires:
/// success, collision, timeout, or the shaped running penalty.
pub fn reward(state: &SimState, flags: BreachFlags, params: &RewardParams) -> f64 {
    match state.done_reason {
        DoneReason::Success => params.r_success,
        DoneReason::Collision | DoneReason::Timeout => params.r_fail,
        DoneReason::Running => {
            let mut r = -params.r_dist_coeff * state.dist_to_goal();
            if flags.major {
                r -= params.r_major_penalty;
            }
            if flags.minor {
                r -= params.r_minor_penalty;
            }
            r
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub true_pos: Point,
    /// Realized velocity command.
    pub velocity: Point,
    pub dist_to_goal: f64,
    pub dist_to_nearest_obstacle: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub terminal: bool,
    pub done_reason: DoneReason,
    pub breach_major: bool,
    pub breach_minor: bool,
    pub info: StepInfo,
}

/// Start a new episode.
pub fn reset<R: Rng + ?Sized>(config: &EnvConfig, rng: &mut R) -> Result<(SimState, Observation), EnvError> {
    config.validate()?;
    let y0 = rng.random_range(config.y_min + config.r_minor..config.y_max - config.r_minor);
    let spawn = Point::new(config.spawn_x(), y0);
    let goal = config.goal();
    let count = rng.random_range(config.obstacle_count_min..=config.obstacle_count_max);

    let radius = config.obstacle_radius;
    let sigma = config.obstacle_y_sigma();
    let center_y = 0.5 * (config.y_min + config.y_max);
    let keep_out = config.r_minor + radius;
    let mut obstacles = Vec::with_capacity(count);
    for index in 0..count {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let x = rng.random_range(spawn.x..goal.x);
            let z: f64 = rng.sample(StandardNormal);
            let y = (center_y + sigma * z).clamp(config.y_min + radius, config.y_max - radius);
            let c = Point::new(x, y);
            if c.distance(spawn) > keep_out && c.distance(goal) > keep_out {
                placed = Some(c);
                break;
            }
        }
        let center = placed.ok_or(EnvError::PlacementFailed {
            index,
            attempts: MAX_PLACEMENT_ATTEMPTS,
        })?;
        obstacles.push(Obstacle { center, radius });
    }

    let state = SimState {
        pos: spawn,
        goal,
        obstacles,
        step: 0,
        done_reason: DoneReason::Running,
    };
    let obs = observe(&state, config);
    Ok((state, obs))
}

/// Advance one control period.
pub fn step(state: &mut SimState, action: Action, config: &EnvConfig) -> Result<StepOutcome, EnvError> {
    if !state.is_running() {
        return Err(EnvError::EpisodeOver(state.done_reason));
    }
    let velocity = action.velocity(config.v_max);
    state.pos = config.clamp(state.pos + velocity * config.dt);
    state.step += 1;

    let hazard = nearest_hazard(state.pos, &state.obstacles, config);
    let flags = BreachFlags::at_distance(hazard.distance, config);
    let dist_to_goal = state.dist_to_goal();
    let dist_to_obstacle = state.dist_to_nearest_obstacle();

    state.done_reason = if dist_to_goal < config.eps_success {
        DoneReason::Success
    } else if dist_to_obstacle <= 0.0 {
        DoneReason::Collision
    } else if state.step >= config.max_steps {
        DoneReason::Timeout
    } else {
        DoneReason::Running
    };

    Ok(StepOutcome {
        observation: observe(state, config),
        reward: reward(state, flags, &config.reward),
        terminal: !state.is_running(),
        done_reason: state.done_reason,
        breach_major: flags.major,
        breach_minor: flags.minor,
        info: StepInfo {
            true_pos: state.pos,
            velocity,
            dist_to_goal,
            dist_to_nearest_obstacle: dist_to_obstacle,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamKind};

    fn empty_state(pos: Point, goal: Point) -> SimState {
        SimState {
            pos,
            goal,
            obstacles: vec![],
            step: 0,
            done_reason: DoneReason::Running,
        }
    }

    #[test]
    fn default_config_is_valid() {
        EnvConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_inverted_safety_radii() {
        let cfg = EnvConfig {
            r_major: 0.3,
            ..EnvConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(EnvError::InvalidConfig(_))));
    }

    #[test]
    fn obstacle_free_reset_geometry() {
        let cfg = EnvConfig {
            obstacle_count_min: 0,
            obstacle_count_max: 0,
            ..EnvConfig::default()
        };
        let (state, obs) = reset(&cfg, &mut stream(3, StreamKind::Env, &[])).unwrap();
        assert!(state.obstacles.is_empty());
        assert_eq!(state.pos.x, cfg.x_min + cfg.r_minor);
        assert_eq!(obs.dx_goal, (cfg.x_max - cfg.x_min) - 2.0 * cfg.r_minor);
        assert_eq!(obs.dy_goal, state.goal.y - state.pos.y);
        assert_eq!(state.goal, Point::new(4.8, 0.0));
    }

    #[test]
    fn reset_is_seeded() {
        let cfg = EnvConfig::default();
        let a = reset(&cfg, &mut stream(11, StreamKind::Env, &[])).unwrap();
        let b = reset(&cfg, &mut stream(11, StreamKind::Env, &[])).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn over_dense_layout_fails() {
        // Spawn and goal discs cover the whole strip between them.
        let cfg = EnvConfig {
            x_max: 1.0,
            y_min: -0.3,
            y_max: 0.3,
            r_minor: 0.2,
            r_major: 0.1,
            obstacle_radius: 0.2,
            obstacle_count_min: 1,
            obstacle_count_max: 1,
            ..EnvConfig::default()
        };
        let err = reset(&cfg, &mut stream(0, StreamKind::Env, &[])).unwrap_err();
        assert!(matches!(err, EnvError::PlacementFailed { index: 0, .. }));
    }

    #[test]
    fn unit_direction_times_speed() {
        let cfg = EnvConfig {
            v_max: 2.0,
            dt: 1.0,
            x_min: -10.0,
            x_max: 10.0,
            y_min: -10.0,
            y_max: 10.0,
            ..EnvConfig::default()
        };
        let mut s = empty_state(Point::ZERO, Point::new(9.0, 9.0));
        let out = step(&mut s, Action::new(0.6, 0.8, 1.0), &cfg).unwrap();
        assert!((s.pos.x - 1.2).abs() < 1e-12 && (s.pos.y - 1.6).abs() < 1e-12);
        assert_eq!(out.info.true_pos, s.pos);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn zero_speed_and_zero_direction_hold_position() {
        let cfg = EnvConfig::default();
        let start = Point::new(1.0, 0.5);
        let mut s = empty_state(start, cfg.goal());
        step(&mut s, Action::new(0.3, -0.2, -1.0), &cfg).unwrap();
        assert_eq!(s.pos, start);
        step(&mut s, Action::new(0.0, 0.0, 1.0), &cfg).unwrap();
        assert_eq!(s.pos, start);
        assert_eq!(s.step, 2);
    }

    #[test]
    fn reaching_goal_pays_success() {
        let cfg = EnvConfig::default();
        let goal = cfg.goal();
        let mut s = empty_state(goal - Point::new(0.12, 0.0), goal);
        let out = step(&mut s, Action::new(1.0, 0.0, 1.0), &cfg).unwrap();
        assert!(out.terminal);
        assert_eq!(out.done_reason, DoneReason::Success);
        assert_eq!(out.reward, 1000.0);
    }

    #[test]
    fn step_after_terminal_is_rejected() {
        let cfg = EnvConfig::default();
        let mut s = empty_state(Point::new(1.0, 0.0), cfg.goal());
        s.done_reason = DoneReason::Collision;
        assert_eq!(
            step(&mut s, Action::default(), &cfg),
            Err(EnvError::EpisodeOver(DoneReason::Collision))
        );
    }

    #[test]
    fn collision_and_timeout_terminate_with_failure() {
        let cfg = EnvConfig {
            max_steps: 3,
            ..EnvConfig::default()
        };
        let mut s = empty_state(Point::new(1.0, 0.0), cfg.goal());
        s.obstacles.push(Obstacle {
            center: Point::new(1.1, 0.0),
            radius: 0.09,
        });
        let out = step(&mut s, Action::new(1.0, 0.0, 1.0), &cfg).unwrap();
        assert_eq!(out.done_reason, DoneReason::Collision);
        assert_eq!(out.reward, -1000.0);

        let mut s = empty_state(Point::new(1.0, 0.0), cfg.goal());
        for _ in 0..2 {
            assert!(!step(&mut s, Action::new(0.0, 0.0, 0.0), &cfg).unwrap().terminal);
        }
        let out = step(&mut s, Action::new(0.0, 0.0, 0.0), &cfg).unwrap();
        assert_eq!(out.done_reason, DoneReason::Timeout);
        assert_eq!(out.reward, -1000.0);
    }

    #[test]
    fn goal_offset_is_vector_difference() {
        let cfg = EnvConfig::default();
        let s = empty_state(Point::new(1.0, 1.0), Point::new(4.0, 0.0));
        let o = observe(&s, &cfg);
        assert_eq!((o.dx_goal, o.dy_goal), (3.0, -1.0));
    }

    #[test]
    fn closest_obstacle_surface_point() {
        let cfg = EnvConfig {
            x_min: -10.0,
            x_max: 10.0,
            y_min: -10.0,
            y_max: 10.0,
            ..EnvConfig::default()
        };
        let mut s = empty_state(Point::ZERO, Point::new(5.0, 0.0));
        let o = Obstacle {
            center: Point::new(2.0, 0.0),
            radius: 0.5,
        };
        s.obstacles.push(o);
        let obs = observe(&s, &cfg);
        // Oracle: center - radius * unit(center - pos), relative to pos.
        let dir = o.center * (1.0 / o.center.norm());
        let expected = o.center - dir * o.radius;
        assert_eq!((obs.dx_obs, obs.dy_obs), (expected.x, expected.y));
        assert_eq!((obs.dx_obs, obs.dy_obs), (1.5, 0.0));
    }

    #[test]
    fn equidistant_obstacles_break_tie_by_index() {
        let cfg = EnvConfig::default();
        let obstacles = [
            Obstacle {
                center: Point::new(2.5, 0.5),
                radius: 0.15,
            },
            Obstacle {
                center: Point::new(2.5, -0.5),
                radius: 0.15,
            },
        ];
        let h = nearest_hazard(Point::new(2.5, 0.0), &obstacles, &cfg);
        assert_eq!(h.kind, HazardKind::Obstacle(0));
    }

    #[test]
    fn without_obstacles_a_wall_is_nearest() {
        let cfg = EnvConfig::default();
        let h = nearest_hazard(Point::new(1.0, 1.7), &[], &cfg);
        assert_eq!(h.kind, HazardKind::Wall(Wall::Top));
        assert!((h.offset.y - 0.3).abs() < 1e-12 && h.offset.x == 0.0);
    }

    #[test]
    fn reward_table() {
        let p = RewardParams::default();
        let cfg = EnvConfig::default();
        let goal = cfg.goal();
        let mut s = empty_state(goal - Point::new(0.5, 0.0), goal);
        assert_eq!(reward(&s, BreachFlags::default(), &p), -2.0);
        let minor = BreachFlags { major: false, minor: true };
        assert_eq!(reward(&s, minor, &p), -3.0);
        let both = BreachFlags { major: true, minor: true };
        assert_eq!(reward(&s, both, &p), -8.0);
        s.done_reason = DoneReason::Success;
        assert_eq!(reward(&s, both, &p), 1000.0);
        s.done_reason = DoneReason::Collision;
        assert_eq!(reward(&s, both, &p), -1000.0);
    }

    #[test]
    fn wall_contact_is_a_breach_not_a_collision() {
        let cfg = EnvConfig::default();
        let mut s = empty_state(Point::new(1.0, cfg.y_max - 0.01), cfg.goal());
        for _ in 0..2 {
            let out = step(&mut s, Action::new(0.0, 1.0, 1.0), &cfg).unwrap();
            assert!(!out.terminal);
            assert!(out.breach_major && out.breach_minor);
            assert_eq!(s.pos.y, cfg.y_max);
        }
    }
}
