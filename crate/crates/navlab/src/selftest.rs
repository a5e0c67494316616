//! Fast oracle checks runnable from the installed binary.

use navlab_core::env::{reward, BreachFlags, DoneReason, EnvConfig, Point, SimState};
use navlab_core::filters::{lpf_design, DenoiserKind, FilterConfig, KalmanState};
use navlab_core::nn::{read_policy, write_policy, ActorCritic, Activation, Mlp};
use navlab_core::ppo::{compute_gae, train, PpoConfig, TrainConfig};
use navlab_core::rng::{stream, StreamKind};
use rand::Rng;

use crate::eval::{evaluate_cell, CellKey, StraightToGoal};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn reward_table() -> Check {
    let env = EnvConfig::default();
    let state = |reason, x: f64| SimState {
        pos: Point::new(x, 0.0),
        goal: Point::new(4.8, 0.0),
        obstacles: vec![],
        step: 1,
        done_reason: reason,
    };
    let p = &env.reward;
    let none = BreachFlags::default();
    let cases = [
        (reward(&state(DoneReason::Success, 4.75), none, p), 1000.0),
        (reward(&state(DoneReason::Collision, 2.0), none, p), -1000.0),
        (reward(&state(DoneReason::Timeout, 2.0), none, p), -1000.0),
        (reward(&state(DoneReason::Running, 3.8), none, p), -4.0),
        (reward(&state(DoneReason::Running, 3.8), BreachFlags { major: false, minor: true }, p), -5.0),
        (reward(&state(DoneReason::Running, 3.8), BreachFlags { major: true, minor: true }, p), -10.0),
    ];
    let bad: Vec<String> = cases.iter().filter(|(got, want)| got != want).map(|(g, w)| format!("{g} != {w}")).collect();
    check("reward table", bad.is_empty() && env.eps_success == 0.1, bad.join("; "))
}

fn lpf_dc_gain() -> Check {
    match lpf_design(2.0, 20.0) {
        Ok(c) => check("lpf dc gain", (c.dc_gain() - 1.0).abs() < 1e-9, format!("gain {}", c.dc_gain())),
        Err(e) => check("lpf dc gain", false, e.to_string()),
    }
}

fn kalman_covariance() -> Check {
    let mut rng = stream(1, StreamKind::Noise, &[]);
    let mut kf = KalmanState::new(0.05, 0.25, 0.1).expect("valid kalman");
    for _ in 0..10_000 {
        let m = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let v = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        if kf.step(m, v, 0.05).is_err() {
            return check("kalman covariance", false, "step failed".into());
        }
        let p = kf.covariance;
        if (p - p.transpose()).abs().max() > 1e-12 || p.cholesky().is_none() {
            return check("kalman covariance", false, format!("lost symmetry or definiteness: {p}"));
        }
    }
    check("kalman covariance", true, "10000 steps".into())
}

fn gradient() -> Check {
    let mut rng = stream(2, StreamKind::Init, &[]);
    let net: Mlp<f64> = Mlp::random(&[4, 6, 3], Activation::Tanh, Activation::Tanh, 0.7, &mut rng);
    let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |n: &Mlp<f64>| n.forward(&x).unwrap().iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let cache = net.forward_batch(&x, 1).unwrap();
    let mut g = vec![0.0; net.num_params()];
    net.backward(&cache, &w, &mut g).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..net.num_params() {
        let (mut a, mut b) = (net.clone(), net.clone());
        a.params_mut()[i] += h;
        b.params_mut()[i] -= h;
        let fd = (loss(&a) - loss(&b)) / (2.0 * h);
        worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
    }
    check("mlp gradient", worst < 1e-4, format!("max relative error {worst:.2e}"))
}

fn gae() -> Check {
    let r = [1.0f64, -0.5, 2.0, 0.25];
    let v = [0.1f64, 0.2, -0.3, 0.4];
    let d = [false, true, false, false];
    let (adv, _) = compute_gae(&r, &v, &d, 0.7, 0.9, 0.8);
    let mut worst: f64 = 0.0;
    for t in 0..4 {
        let mut want = 0.0f64;
        let mut k = 1.0;
        for l in t..4 {
            let next = if l + 1 < 4 { v[l + 1] } else { 0.7 };
            let mask = if d[l] { 0.0 } else { 1.0 };
            want += k * (r[l] + 0.9 * next * mask - v[l]);
            if d[l] {
                break;
            }
            k *= 0.9 * 0.8;
        }
        worst = worst.max((want - adv[t]).abs());
    }
    check("gae", worst < 1e-12, format!("max error {worst:.2e}"))
}

fn scripted_success() -> Check {
    let env = EnvConfig { obstacle_count_min: 0, obstacle_count_max: 0, ..EnvConfig::default() };
    match evaluate_cell(&StraightToGoal, &env, &FilterConfig::default(), CellKey::new(0.0, 0.0, DenoiserKind::None), 20, 0) {
        Ok(r) => check("scripted success", r.successes == 20, format!("{}/20", r.successes)),
        Err(e) => check("scripted success", false, e.to_string()),
    }
}

fn checkpoint_roundtrip() -> Check {
    let model: ActorCritic<f32> = ActorCritic::new(4, &[8, 8], 3, &mut stream(3, StreamKind::Init, &[]));
    let mut buf = Vec::new();
    let ok = write_policy(&mut buf, &model).is_ok() && read_policy(buf.as_slice()).ok().as_ref() == Some(&model);
    check("checkpoint roundtrip", ok, format!("{} bytes", buf.len()))
}

fn determinism() -> Check {
    let cfg = TrainConfig {
        ppo: PpoConfig { total_timesteps: 512, rollout_length: 256, epochs_per_update: 2, ..PpoConfig::default() },
        ..TrainConfig::default()
    };
    match (train(cfg.clone(), 5), train(cfg, 5)) {
        (Ok(a), Ok(b)) => check("training determinism", a == b, format!("{} episodes", a.1.episodes.len())),
        _ => check("training determinism", false, "training failed".into()),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        reward_table(),
        lpf_dc_gain(),
        kalman_covariance(),
        gradient(),
        gae(),
        scripted_success(),
        checkpoint_roundtrip(),
        determinism(),
    ]
}
