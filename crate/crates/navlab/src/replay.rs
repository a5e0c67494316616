//! Single-episode replays: per-step positions and a top-down rendering.

use std::fmt::Write as _;
use std::io::Write;

use navlab_core::env::{DoneReason, EnvConfig, Obstacle, Point};
use navlab_core::filters::FilterConfig;
use navlab_core::noise::NoiseSpec;
use navlab_core::pipeline::NoisyNav;

use crate::eval::{fmt_g9, run_episode, CellKey, EvalError, Policy, TrajectoryStep};

pub const TRAJECTORY_HEADER: &str = "step,true_x,true_y,noisy_x,noisy_y,denoised_x,denoised_y,vx_raw,vy_raw,vmag_raw,reward";

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub env: EnvConfig,
    pub goal: Point,
    pub obstacles: Vec<Obstacle>,
    pub steps: Vec<TrajectoryStep>,
    pub outcome: DoneReason,
    pub ep_return: f64,
}

impl TrajectoryRecord {
    fn rmse(&self, f: impl Fn(&TrajectoryStep) -> Point) -> f64 {
        let sum: f64 = self.steps.iter().map(|s| (f(s) - s.true_pos).norm().powi(2)).sum();
        (sum / self.steps.len() as f64).sqrt()
    }

    /// RMS distance between the raw measurements and the true positions.
    pub fn measured_rmse(&self) -> f64 {
        self.rmse(|s| s.measured)
    }

    /// RMS distance between the denoised estimates and the true positions.
    pub fn estimate_rmse(&self) -> f64 {
        self.rmse(|s| s.estimate)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_HEADER}")?;
        for (i, s) in self.steps.iter().enumerate() {
            let f = [
                s.true_pos.x,
                s.true_pos.y,
                s.measured.x,
                s.measured.y,
                s.estimate.x,
                s.estimate.y,
                s.action.vx_raw,
                s.action.vy_raw,
                s.action.vmag_raw,
                s.reward,
            ];
            let cols: Vec<String> = f.iter().map(|&v| fmt_g9(v)).collect();
            writeln!(w, "{i},{}", cols.join(","))?;
        }
        Ok(())
    }

    /// Top-down view: arena, safety bounds, obstacles, goal disc, true path
    /// (red) and position estimates (green dots).
    pub fn render_svg(&self) -> String {
        const SCALE: f64 = 120.0;
        const PAD: f64 = 30.0;
        let e = &self.env;
        let w = (e.x_max - e.x_min) * SCALE + 2.0 * PAD;
        let h = (e.y_max - e.y_min) * SCALE + 2.0 * PAD + 24.0;
        let px = |x: f64| PAD + (x - e.x_min) * SCALE;
        let py = |y: f64| PAD + 24.0 + (e.y_max - y) * SCALE;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{PAD}" y="20">outcome: {:?}, return {}, {} steps</text>"#,
            self.outcome,
            fmt_g9(self.ep_return),
            self.steps.len().saturating_sub(1)
        );
        let (ax, ay, aw, ah) = (px(e.x_min), py(e.y_max), (e.x_max - e.x_min) * SCALE, (e.y_max - e.y_min) * SCALE);
        let _ = writeln!(out, r##"<rect class="arena" x="{ax}" y="{ay}" width="{aw}" height="{ah}" fill="#f7f7f7" stroke="#000" stroke-width="2"/>"##);
        let inset = e.r_minor * SCALE;
        let _ = writeln!(
            out,
            r##"<rect class="geofence" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#999" stroke-dasharray="6 4"/>"##,
            ax + inset,
            ay + inset,
            aw - 2.0 * inset,
            ah - 2.0 * inset
        );
        for o in &self.obstacles {
            let (cx, cy) = (px(o.center.x), py(o.center.y));
            for (r, color) in [(o.radius + e.r_minor, "#f0c000"), (o.radius + e.r_major, "#e07000")] {
                let _ = writeln!(out, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="none" stroke="{color}" stroke-dasharray="4 3"/>"#, r * SCALE);
            }
            let _ = writeln!(out, r##"<circle class="obstacle" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#555"/>"##, o.radius * SCALE);
        }
        let _ = writeln!(
            out,
            r##"<circle class="goal" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#4caf50" fill-opacity="0.5" stroke="#2e7d32"/>"##,
            px(self.goal.x),
            py(self.goal.y),
            e.eps_success * SCALE
        );
        for s in &self.steps {
            if s.measured != s.estimate {
                let _ = writeln!(out, r##"<circle class="measured" cx="{:.2}" cy="{:.2}" r="1.2" fill="#9e9e9e"/>"##, px(s.measured.x), py(s.measured.y));
            }
        }
        for s in &self.steps {
            let _ = writeln!(out, r##"<circle class="estimate" cx="{:.2}" cy="{:.2}" r="1.8" fill="#2e7d32"/>"##, px(s.estimate.x), py(s.estimate.y));
        }
        let pts: Vec<String> = self.steps.iter().map(|s| format!("{:.2},{:.2}", px(s.true_pos.x), py(s.true_pos.y))).collect();
        let _ = writeln!(out, r##"<polyline class="true-path" fill="none" stroke="#d32f2f" stroke-width="2" points="{}"/>"##, pts.join(" "));
        out.push_str("</svg>\n");
        out
    }
}

/// Replay episode 0 of the evaluation cell `(noise, filter.kind)` under
/// `seed`, recording every step.
pub fn replay_episode(
    policy: &dyn Policy,
    env: &EnvConfig,
    noise: NoiseSpec,
    filter: &FilterConfig,
    seed: u64,
) -> Result<TrajectoryRecord, EvalError> {
    let key = CellKey::new(noise.mu, noise.sigma, filter.kind);
    let (env_rng, noise_rng, mut policy_rng) = key.streams(seed, 0);
    let mut nav = NoisyNav::new(env.clone(), noise, filter.clone(), env_rng, noise_rng)?;
    let mut steps = Vec::with_capacity(env.max_steps + 1);
    let res = run_episode(policy, &mut nav, &mut policy_rng, Some(&mut steps))?;
    Ok(TrajectoryRecord {
        env: env.clone(),
        goal: res.goal,
        obstacles: res.obstacles,
        steps,
        outcome: res.outcome,
        ep_return: res.ep_return,
    })
}
