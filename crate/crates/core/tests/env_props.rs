use navlab_core::env::{
    nearest_hazard, observe, observe_from, reset, reward, step, Action, BreachFlags, DoneReason, EnvConfig, HazardKind,
    Obstacle, Point, SimState, Wall,
};
use navlab_core::rng::{stream, StreamKind};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn action_strategy() -> impl Strategy<Value = Action> {
    (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b, c)| Action::new(a, b, c))
}

fn rollout(cfg: &EnvConfig, seed: u64, actions: &[Action]) -> Vec<(Point, f64, DoneReason)> {
    let mut rng = stream(seed, StreamKind::Env, &[]);
    let (mut s, _) = reset(cfg, &mut rng).unwrap();
    let mut out = Vec::new();
    for &a in actions {
        if !s.is_running() {
            break;
        }
        let o = step(&mut s, a, cfg).unwrap();
        out.push((o.info.true_pos, o.reward, o.done_reason));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_are_deterministic(seed in any::<u64>(), actions in prop::collection::vec(action_strategy(), 1..120)) {
        let cfg = EnvConfig::default();
        let a = rollout(&cfg, seed, &actions);
        let b = rollout(&cfg, seed, &actions);
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.0.x.to_bits(), y.0.x.to_bits());
            prop_assert_eq!(x.0.y.to_bits(), y.0.y.to_bits());
            prop_assert_eq!(x.1.to_bits(), y.1.to_bits());
            prop_assert_eq!(x.2, y.2);
        }
    }

    #[test]
    fn position_stays_in_arena(seed in any::<u64>(), actions in prop::collection::vec(action_strategy(), 1..200)) {
        let cfg = EnvConfig::default();
        for (p, _, _) in rollout(&cfg, seed, &actions) {
            prop_assert!(p.x >= cfg.x_min && p.x <= cfg.x_max && p.y >= cfg.y_min && p.y <= cfg.y_max, "{p:?}");
        }
    }

    #[test]
    fn exactly_one_reward_branch(seed in any::<u64>(), actions in prop::collection::vec(action_strategy(), 1..200)) {
        let cfg = EnvConfig::default();
        let p = &cfg.reward;
        let mut rng = stream(seed, StreamKind::Env, &[]);
        let (mut s, _) = reset(&cfg, &mut rng).unwrap();
        for a in actions {
            if !s.is_running() {
                break;
            }
            let o = step(&mut s, a, &cfg).unwrap();
            let shaped = -p.r_dist_coeff * o.info.dist_to_goal
                - if o.breach_major { p.r_major_penalty } else { 0.0 }
                - if o.breach_minor { p.r_minor_penalty } else { 0.0 };
            let branches = [
                (o.done_reason == DoneReason::Success, p.r_success),
                (o.done_reason == DoneReason::Collision, p.r_fail),
                (o.done_reason == DoneReason::Timeout, p.r_fail),
                (o.done_reason == DoneReason::Running, shaped),
            ];
            let fired: Vec<_> = branches.iter().filter(|b| b.0).collect();
            prop_assert_eq!(fired.len(), 1);
            prop_assert_eq!(o.reward, fired[0].1);
            prop_assert_eq!(o.terminal, o.done_reason != DoneReason::Running);
        }
    }

    #[test]
    fn major_breach_implies_minor(d in -1.0f64..3.0) {
        let f = BreachFlags::at_distance(d, &EnvConfig::default());
        prop_assert!(!f.major || f.minor);
    }

    #[test]
    fn unsuccessful_episodes_have_negative_return(seed in any::<u64>(), actions in prop::collection::vec(action_strategy(), 400)) {
        let cfg = EnvConfig::default();
        let steps = rollout(&cfg, seed, &actions);
        if steps.last().map(|s| s.2) != Some(DoneReason::Success) {
            let ret: f64 = steps.iter().map(|s| s.1).sum();
            prop_assert!(ret < 0.0);
        }
    }

    #[test]
    fn wall_is_nearest_without_obstacles(x in 0.0f64..5.0, y in -2.0f64..2.0) {
        let cfg = EnvConfig::default();
        let pos = Point::new(x, y);
        let h = nearest_hazard(pos, &[], &cfg);
        prop_assert!(matches!(h.kind, HazardKind::Wall(_)));
        let want = [x - cfg.x_min, cfg.x_max - x, y - cfg.y_min, cfg.y_max - y].into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!((h.offset.norm() - want).abs() < 1e-12);
    }

    #[test]
    fn observations_are_finite(seed in any::<u64>()) {
        let mut rng = stream(seed, StreamKind::Env, &[]);
        let (s, obs) = reset(&EnvConfig::default(), &mut rng).unwrap();
        prop_assert!(obs.is_finite());
        prop_assert!(s.obstacles.iter().all(|o| EnvConfig::default().contains(o.center)));
    }
}

#[test]
fn empty_arena_goal_offset() {
    let cfg = EnvConfig { obstacle_count_min: 0, obstacle_count_max: 0, ..EnvConfig::default() };
    for seed in 0..20 {
        let (s, obs) = reset(&cfg, &mut stream(seed, StreamKind::Env, &[])).unwrap();
        assert!(s.obstacles.is_empty());
        assert!((obs.dx_goal - ((cfg.x_max - cfg.x_min) - 2.0 * cfg.r_minor)).abs() < 1e-12);
        assert!((obs.dy_goal - (s.goal.y - s.pos.y)).abs() < 1e-12);
    }
}

#[test]
fn same_seed_same_layout() {
    let cfg = EnvConfig::default();
    let a = reset(&cfg, &mut stream(9, StreamKind::Env, &[])).unwrap();
    let b = reset(&cfg, &mut stream(9, StreamKind::Env, &[])).unwrap();
    assert_eq!(a, b);
}

#[test]
fn obstacle_count_is_uniform() {
    let cfg = EnvConfig { obstacle_count_min: 1, obstacle_count_max: 3, ..EnvConfig::default() };
    let mut rng = stream(2024, StreamKind::Env, &[]);
    let mut counts = [0usize; 3];
    let n = 10_000;
    for _ in 0..n {
        let (s, _) = reset(&cfg, &mut rng).unwrap();
        counts[s.obstacles.len() - 1] += 1;
    }
    let expected = n as f64 / 3.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "counts {counts:?}, chi2 {chi2}, p {p}");
    let sd = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for c in counts {
        assert!((c as f64 - expected).abs() < 3.0 * sd, "{counts:?}");
    }
}

fn state_at(pos: Point, obstacles: Vec<Obstacle>) -> SimState {
    SimState { pos, goal: Point::new(4.8, 0.0), obstacles, step: 0, done_reason: DoneReason::Running }
}

#[test]
fn velocity_normalization_example() {
    let cfg = EnvConfig {
        x_min: -5.0,
        y_min: -5.0,
        y_max: 5.0,
        v_max: 2.0,
        dt: 1.0,
        obstacle_count_min: 0,
        obstacle_count_max: 0,
        ..EnvConfig::default()
    };
    let mut s = state_at(Point::ZERO, vec![]);
    let o = step(&mut s, Action::new(0.6, 0.8, 1.0), &cfg).unwrap();
    assert!((s.pos.x - 1.2).abs() < 1e-12 && (s.pos.y - 1.6).abs() < 1e-12, "{:?}", s.pos);
    assert_eq!(s.step, 1);
    assert!((o.info.velocity.norm() - 2.0).abs() < 1e-12);
}

#[test]
fn zero_speed_holds_position() {
    let cfg = EnvConfig::default();
    let mut s = state_at(Point::new(1.0, 0.5), vec![]);
    step(&mut s, Action::new(0.3, -0.2, -1.0), &cfg).unwrap();
    assert_eq!(s.pos, Point::new(1.0, 0.5));
    assert_eq!(s.step, 1);
}

#[test]
fn reaching_goal_pays_success() {
    let cfg = EnvConfig::default();
    let mut s = state_at(Point::new(4.8 - 0.12, 0.0), vec![]);
    let o = step(&mut s, Action::new(1.0, 0.0, 1.0), &cfg).unwrap();
    assert!(o.terminal);
    assert_eq!(o.done_reason, DoneReason::Success);
    assert_eq!(o.reward, 1000.0);
}

#[test]
fn entering_obstacle_is_collision() {
    let cfg = EnvConfig::default();
    let obstacle = Obstacle { center: Point::new(2.0, 0.0), radius: 0.15 };
    let mut s = state_at(Point::new(1.84, 0.0), vec![obstacle]);
    let o = step(&mut s, Action::new(1.0, 0.0, 1.0), &cfg).unwrap();
    assert_eq!(o.done_reason, DoneReason::Collision);
    assert_eq!(o.reward, -1000.0);
    assert!(step(&mut s, Action::new(1.0, 0.0, 1.0), &cfg).is_err());
}

#[test]
fn timeout_pays_failure() {
    let cfg = EnvConfig { max_steps: 3, ..EnvConfig::default() };
    let mut s = state_at(Point::new(1.0, 0.0), vec![]);
    let rewards: Vec<f64> = (0..3).map(|_| step(&mut s, Action::new(0.0, 1.0, -1.0), &cfg).unwrap().reward).collect();
    assert_eq!(s.done_reason, DoneReason::Timeout);
    assert_eq!(rewards[2], -1000.0);
    assert!(rewards[..2].iter().all(|&r| r < 0.0 && r > -1000.0));
}

#[test]
fn shaped_reward_table() {
    let p = EnvConfig::default().reward;
    let s = state_at(Point::new(4.3, 0.0), vec![]);
    assert_eq!(reward(&s, BreachFlags::default(), &p), -2.0);
    assert_eq!(reward(&s, BreachFlags { major: false, minor: true }, &p), -3.0);
    assert_eq!(reward(&s, BreachFlags { major: true, minor: true }, &p), -8.0);
}

#[test]
fn goal_offset_example() {
    let cfg = EnvConfig::default();
    let obs = observe_from(Point::new(1.0, 1.0), Point::new(4.0, 0.0), &[], &cfg);
    assert_eq!((obs.dx_goal, obs.dy_goal), (3.0, -1.0));
}

#[test]
fn nearest_obstacle_surface_point() {
    let cfg = EnvConfig { x_min: -5.0, x_max: 5.0, y_min: -5.0, y_max: 5.0, ..EnvConfig::default() };
    let o = Obstacle { center: Point::new(2.0, 0.0), radius: 0.5 };
    let obs = observe_from(Point::ZERO, Point::new(4.0, 0.0), &[o], &cfg);
    let c = o.center;
    let unit = c * (1.0 / c.norm());
    let want = c - unit * o.radius;
    assert!((obs.dx_obs - want.x).abs() < 1e-12 && (obs.dy_obs - want.y).abs() < 1e-12);
    assert!((obs.dx_obs - 1.5).abs() < 1e-12 && obs.dy_obs.abs() < 1e-12);
}

#[test]
fn equidistant_obstacles_break_ties_by_index() {
    let cfg = EnvConfig { x_min: -5.0, x_max: 5.0, y_min: -5.0, y_max: 5.0, ..EnvConfig::default() };
    let a = Obstacle { center: Point::new(1.0, 0.0), radius: 0.2 };
    let b = Obstacle { center: Point::new(-1.0, 0.0), radius: 0.2 };
    assert_eq!(nearest_hazard(Point::ZERO, &[a, b], &cfg).kind, HazardKind::Obstacle(0));
    assert_eq!(nearest_hazard(Point::ZERO, &[b, a], &cfg).kind, HazardKind::Obstacle(0));
    let h = nearest_hazard(Point::ZERO, &[b, a], &cfg);
    assert!((h.offset.x + 0.8).abs() < 1e-12);
}

#[test]
fn empty_arena_points_to_nearest_wall() {
    let cfg = EnvConfig::default();
    let s = state_at(Point::new(2.5, 1.7), vec![]);
    let obs = observe(&s, &cfg);
    assert!(obs.dx_obs.abs() < 1e-12 && (obs.dy_obs - 0.3).abs() < 1e-12);
    assert_eq!(nearest_hazard(s.pos, &[], &cfg).kind, HazardKind::Wall(Wall::Top));
}
