use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn navlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navlab")).args(args).current_dir(cwd).env("NAVLAB_THREADS", "2").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
[env]
obstacle_count_min = 1
obstacle_count_max = 2

[ppo]
total_timesteps = 4096
rollout_length = 2048
epochs_per_update = 2

[sweep]
episodes_per_cell = 5
obstacle_count_min = 0
obstacle_count_max = 3
"#;

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = navlab(&["selftest"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn train_then_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let o = navlab(&["train", "small.toml", "--seed", "3", "--out", "run"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["policy.ckpt", "trainlog.csv", "config.toml"] {
        assert!(dir.path().join("run").join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(dir.path().join("run/trainlog.csv")).unwrap();
    assert!(log.starts_with("step,episode,ep_return,ep_len,mean100_return,mean100_len,policy_loss,value_loss,clip_frac\n"));

    let o = navlab(&["eval", "small.toml", "--checkpoint", "run/policy.ckpt", "--sigma", "0.5", "--denoiser", "kalman"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "mu,sigma,denoiser,episodes,successes,collisions,timeouts,success_rate,mean_return,mean_length");
    assert!(lines[1].starts_with("0,0.5,kalman,5,"), "{}", lines[1]);

    let o = navlab(&["replay", "small.toml", "--checkpoint", "run/policy.ckpt", "--seed", "1", "--out", "rp"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("rp/trajectory.svg").is_file());

    let o = navlab(&["sweep", "small.toml", "--checkpoint", "run/policy.ckpt", "--kind", "unbiased", "--episodes", "2", "--out", "u.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(dir.path().join("u.csv")).unwrap().lines().count(), 32);

    let o = navlab(&["plot", "u.csv", "--kind", "unbiased", "--out", "plots"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("plots/unbiased.svg").is_file());
    let o = navlab(&["plot", "run/trainlog.csv", "--kind", "training", "--out", "plots"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_checkpoint_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    let o = navlab(&["sweep", "c.toml", "--checkpoint", "nope.ckpt", "--kind", "unbiased"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint not found"), "{}", stderr(&o));
}

#[test]
fn failures_have_distinct_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.toml"), "[env]\nv_maxx = 1.0\n").unwrap();
    fs::write(dir.path().join("bad.csv"), "mu,sigma\n1,2\n").unwrap();
    fs::write(dir.path().join("ok.toml"), SMALL).unwrap();

    let unknown_flag = navlab(&["selftest", "--bogus"], dir.path());
    let unreadable = navlab(&["train", "missing.toml"], dir.path());
    let unknown_key = navlab(&["train", "typo.toml"], dir.path());
    let malformed = navlab(&["plot", "bad.csv", "--kind", "unbiased"], dir.path());
    let outs = [&unknown_flag, &unreadable, &unknown_key, &malformed];
    for o in outs {
        assert!(!o.status.success());
        assert!(!stderr(o).trim().is_empty());
    }
    assert!(stderr(&unknown_flag).contains("--bogus"));
    assert!(stderr(&unreadable).contains("missing.toml"));
    assert!(stderr(&unknown_key).contains("v_maxx"));
    assert!(stderr(&malformed).contains("bad.csv"));
    let msgs: Vec<String> = outs.iter().map(|o| stderr(o)).collect();
    for i in 0..msgs.len() {
        for j in i + 1..msgs.len() {
            assert_ne!(msgs[i], msgs[j]);
        }
    }
}
