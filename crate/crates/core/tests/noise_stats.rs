use navlab_core::env::{observe, observe_from, DoneReason, EnvConfig, Obstacle, Point, SimState};
use navlab_core::noise::{perturb_observation, perturb_position, NoiseConfig, NoiseSpec};
use navlab_core::rng::{stream, StreamKind};
use proptest::prelude::*;

fn state(pos: Point, obstacles: Vec<Obstacle>) -> SimState {
    SimState { pos, goal: Point::new(4.0, 0.0), obstacles, step: 0, done_reason: DoneReason::Running }
}

#[test]
fn unit_gaussian_moments() {
    let mut rng = stream(11, StreamKind::Noise, &[]);
    let spec = NoiseSpec::new(0.0, 1.0);
    let n = 100_000;
    let draws: Vec<f64> = (0..n / 2)
        .flat_map(|_| {
            let p = perturb_position(Point::ZERO, &spec, &mut rng);
            [p.x, p.y]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((sd - 1.0).abs() < 0.02, "sd {sd}");
}

#[test]
fn axes_are_uncorrelated() {
    let mut rng = stream(12, StreamKind::Noise, &[]);
    let spec = NoiseSpec::new(0.0, 1.0);
    let n = 100_000;
    let c: f64 = (0..n).map(|_| {
        let p = perturb_position(Point::ZERO, &spec, &mut rng);
        p.x * p.y
    }).sum::<f64>() / n as f64;
    assert!(c.abs() < 3.0 / (n as f64).sqrt(), "correlation {c}");
}

#[test]
fn pure_bias_example() {
    let mut rng = stream(0, StreamKind::Noise, &[]);
    let p = perturb_position(Point::new(1.0, 2.0), &NoiseSpec::new(0.15, 0.0), &mut rng);
    assert!((p.x - 1.15).abs() < 1e-15 && (p.y - 2.15).abs() < 1e-15);
}

#[test]
fn bias_shifts_goal_offsets() {
    let cfg = EnvConfig::default();
    let s = state(Point::new(1.0, 1.0), vec![]);
    let (_, obs) = perturb_observation(&s, &NoiseSpec::new(0.1, 0.0), &mut stream(0, StreamKind::Noise, &[]), &cfg);
    assert!((obs.dx_goal - 2.9).abs() < 1e-12 && (obs.dy_goal + 1.1).abs() < 1e-12);
}

#[test]
fn noisy_position_selects_nearest_obstacle() {
    let cfg = EnvConfig::default();
    let left = Obstacle { center: Point::new(2.0, 0.0), radius: 0.15 };
    let right = Obstacle { center: Point::new(3.0, 0.0), radius: 0.15 };
    let s = state(Point::new(2.45, 0.0), vec![left, right]);
    let truth = observe(&s, &cfg);
    assert!(truth.dx_obs < 0.0, "true nearest is the left obstacle");
    let (measured, obs) = perturb_observation(&s, &NoiseSpec::new(0.1, 0.0), &mut stream(0, StreamKind::Noise, &[]), &cfg);
    assert!(measured.x > 2.5);
    assert!(obs.dx_obs > 0.0, "selection flips once the measurement crosses the midpoint");
    let oracle = right.center - (right.center - measured) * (right.radius / (right.center - measured).norm()) - measured;
    assert!((obs.dx_obs - oracle.x).abs() < 1e-12 && (obs.dy_obs - oracle.y).abs() < 1e-12);
}

#[test]
fn noiseless_observation_equals_truth() {
    let cfg = EnvConfig::default();
    let s = state(Point::new(1.3, -0.4), vec![Obstacle { center: Point::new(2.0, 0.5), radius: 0.15 }]);
    let (m, obs) = perturb_observation(&s, &NoiseSpec::NONE, &mut stream(0, StreamKind::Noise, &[]), &cfg);
    assert_eq!(m, s.pos);
    assert_eq!(obs, observe(&s, &cfg));
    assert_eq!(obs, observe_from(s.pos, s.goal, &s.obstacles, &cfg));
}

#[test]
fn composition_examples() {
    assert_eq!(NoiseSpec::new(0.15, 0.0).compose(NoiseSpec::new(0.0, 0.8)), NoiseSpec::new(0.15, 0.8));
    assert_eq!(NoiseSpec::NONE.compose(NoiseSpec::NONE), NoiseSpec::NONE);
    let c = NoiseSpec::new(0.0, 0.3).compose(NoiseSpec::new(0.0, 0.4));
    assert!(c.mu == 0.0 && (c.sigma - 0.5).abs() < 1e-15);
    let cfg = NoiseConfig { mu: 0.15, sigma: 0.0, injected_mu: 0.0, injected_sigma: 0.8 };
    assert_eq!(cfg.effective(), NoiseSpec::new(0.15, 0.8));
}

#[test]
fn composed_law_matches_sum_of_draws() {
    let (a, b) = (NoiseSpec::new(0.1, 0.3), NoiseSpec::new(-0.05, 0.4));
    let c = a.compose(b);
    let (mut ra, mut rb) = (stream(1, StreamKind::Noise, &[0]), stream(1, StreamKind::Noise, &[1]));
    let n = 100_000;
    let xs: Vec<f64> = (0..n)
        .map(|_| perturb_position(Point::ZERO, &a, &mut ra).x + perturb_position(Point::ZERO, &b, &mut rb).x)
        .collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let se = c.sigma / (n as f64).sqrt();
    assert!((mean - c.mu).abs() < 4.0 * se, "{mean} vs {}", c.mu);
    assert!((sd - c.sigma).abs() < 0.01, "{sd} vs {}", c.sigma);
}

#[test]
fn same_stream_same_sequence() {
    let spec = NoiseSpec::new(0.05, 0.7);
    let seq = |seed| {
        let mut rng = stream(seed, StreamKind::Noise, &[3]);
        (0..100).map(|_| perturb_position(Point::ZERO, &spec, &mut rng)).collect::<Vec<_>>()
    };
    assert_eq!(seq(4), seq(4));
    assert_ne!(seq(4), seq(5));
}

fn spec_strategy() -> impl Strategy<Value = NoiseSpec> {
    (-1.0f64..1.0, 0.0f64..2.0).prop_map(|(m, s)| NoiseSpec::new(m, s))
}

proptest! {
    #[test]
    fn zero_spread_is_exact_offset(x in -10.0f64..10.0, y in -10.0f64..10.0, mu in -1.0f64..1.0, seed in any::<u64>()) {
        let p = perturb_position(Point::new(x, y), &NoiseSpec::new(mu, 0.0), &mut stream(seed, StreamKind::Noise, &[]));
        prop_assert_eq!(p, Point::new(x + mu, y + mu));
    }

    #[test]
    fn compose_is_commutative_and_associative(a in spec_strategy(), b in spec_strategy(), c in spec_strategy()) {
        let (ab, ba) = (a.compose(b), b.compose(a));
        prop_assert!((ab.mu - ba.mu).abs() < 1e-12 && (ab.sigma - ba.sigma).abs() < 1e-12);
        let (l, r) = (a.compose(b).compose(c), a.compose(b.compose(c)));
        prop_assert!((l.mu - r.mu).abs() < 1e-12 && (l.sigma - r.sigma).abs() < 1e-12);
    }

    #[test]
    fn noise_never_touches_true_state(seed in any::<u64>(), spec in spec_strategy()) {
        let cfg = EnvConfig::default();
        let s = state(Point::new(2.0, 0.3), vec![Obstacle { center: Point::new(3.0, 0.0), radius: 0.15 }]);
        let before = s.clone();
        let _ = perturb_observation(&s, &spec, &mut stream(seed, StreamKind::Noise, &[]), &cfg);
        prop_assert_eq!(s, before);
    }
}
