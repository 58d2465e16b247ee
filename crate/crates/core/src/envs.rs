//! Task distributions and episodic point-mass environments.
//!
//! * `nav2d`: the agent starts at the origin and moves by clipped actions;
//!   reward is the negative distance to a goal in `[-1, 1]²`.
//! * `point_vel`: a point mass whose velocity integrates clipped actions;
//!   reward is the negative gap between its forward (x) velocity and the
//!   target speed in `[0, 2]`, minus a small control cost.
//! * `sandbox`: 2D points for the geometric strategy study. They carry no
//!   dynamics and cannot be stepped.
//!
//! Episodes never terminate early: every one lasts exactly `horizon` steps.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    Nav2d,
    PointVel,
    Sandbox,
}

impl TaskFamily {
    pub fn payload_dim(self) -> usize {
        match self {
            TaskFamily::Nav2d | TaskFamily::Sandbox => 2,
            TaskFamily::PointVel => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::Nav2d => "nav2d",
            TaskFamily::PointVel => "point_vel",
            TaskFamily::Sandbox => "sandbox",
        }
    }

    /// Observation and action width of the episodic families.
    pub fn obs_dim(self) -> usize {
        2
    }

    pub fn action_dim(self) -> usize {
        2
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nav2d" => Ok(TaskFamily::Nav2d),
            "point_vel" => Ok(TaskFamily::PointVel),
            "sandbox" => Ok(TaskFamily::Sandbox),
            other => Err(Error::InvalidArgument(format!(
                "unknown task family `{other}`"
            ))),
        }
    }
}

/// A sampled task: goal point, target speed, or sandbox point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub family: TaskFamily,
    pub payload: Vec<f64>,
    /// Drawn from the noise component rather than the nominal distribution.
    pub is_noise: bool,
}

impl Task {
    pub fn new(family: TaskFamily, payload: Vec<f64>, is_noise: bool) -> Result<Self> {
        if payload.len() != family.payload_dim() {
            return Err(Error::dim(
                format!("{family} task payload"),
                family.payload_dim(),
                payload.len(),
            ));
        }
        if let Some(v) = payload.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite("task payload", *v));
        }
        Ok(Task {
            family,
            payload,
            is_noise,
        })
    }
}

/// Fraction and range of injected noise tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub fraction: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            fraction: 0.2,
            low: 3.0,
            high: 4.0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::config(
                "noise.fraction",
                format!("must lie in [0, 1], got {}", self.fraction),
            ));
        }
        if self.low.is_nan() || self.high.is_nan() || self.low > self.high {
            return Err(Error::config(
                "noise.low",
                format!("low {} exceeds high {}", self.low, self.high),
            ));
        }
        Ok(())
    }
}

/// Constants of the episodic environments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub horizon: usize,
    /// Per-component action clip for `nav2d`.
    pub nav_action_clip: f64,
    /// Per-component action clip for `point_vel`.
    pub vel_action_clip: f64,
    /// Control cost coefficient for `point_vel`.
    pub ctrl_cost: f64,
    pub dt: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            horizon: 20,
            nav_action_clip: 0.1,
            vel_action_clip: 0.5,
            ctrl_cost: 0.01,
            dt: 1.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("environment.horizon", "must be positive"));
        }
        for (field, v) in [
            ("environment.nav_action_clip", self.nav_action_clip),
            ("environment.vel_action_clip", self.vel_action_clip),
            ("environment.dt", self.dt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if self.ctrl_cost.is_nan() || self.ctrl_cost < 0.0 {
            return Err(Error::config(
                "environment.ctrl_cost",
                "must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Observable state of an episode.
///
/// The observation is the agent position for `nav2d` and the velocity for
/// `point_vel`; it is the whole dynamic state in both cases.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Vec<f64>,
    pub step_count: usize,
    pub done: bool,
}

/// Initial state: at rest at the origin.
pub fn env_reset(task: &Task) -> Result<EnvState> {
    if task.family == TaskFamily::Sandbox {
        return Err(Error::UnsupportedFamily {
            family: task.family.to_string(),
            operation: "env_reset",
        });
    }
    Ok(EnvState {
        observation: vec![0.0; task.family.obs_dim()],
        step_count: 0,
        done: false,
    })
}

/// Advances one step; returns the next state and the reward.
pub fn env_step(
    config: &EnvConfig,
    task: &Task,
    state: &EnvState,
    action: &[f64],
) -> Result<(EnvState, f64)> {
    if state.done {
        return Err(Error::EpisodeDone {
            horizon: config.horizon,
        });
    }
    if action.len() != task.family.action_dim() {
        return Err(Error::dim("action", task.family.action_dim(), action.len()));
    }
    let (observation, reward) = match task.family {
        TaskFamily::Nav2d => {
            let c = config.nav_action_clip;
            let position: Vec<f64> = state
                .observation
                .iter()
                .zip(action)
                .map(|(p, a)| p + a.clamp(-c, c) * config.dt)
                .collect();
            let dist = position
                .iter()
                .zip(&task.payload)
                .map(|(p, g)| (p - g).powi(2))
                .sum::<f64>()
                .sqrt();
            (position, -dist)
        }
        TaskFamily::PointVel => {
            let c = config.vel_action_clip;
            let applied: Vec<f64> = action.iter().map(|a| a.clamp(-c, c)).collect();
            let velocity: Vec<f64> = state
                .observation
                .iter()
                .zip(&applied)
                .map(|(v, a)| v + a * config.dt)
                .collect();
            let ctrl: f64 = applied.iter().map(|a| a * a).sum();
            let reward = -(velocity[0] - task.payload[0]).abs() - config.ctrl_cost * ctrl;
            (velocity, reward)
        }
        TaskFamily::Sandbox => {
            return Err(Error::UnsupportedFamily {
                family: task.family.to_string(),
                operation: "env_step",
            })
        }
    };
    let step_count = state.step_count + 1;
    Ok((
        EnvState {
            observation,
            step_count,
            done: step_count >= config.horizon,
        },
        reward,
    ))
}

fn sample_nominal<R: Rng + ?Sized>(family: TaskFamily, rng: &mut R) -> Result<Task> {
    let payload = match family {
        TaskFamily::Nav2d => vec![rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)],
        TaskFamily::PointVel => vec![rng.random_range(0.0..=2.0)],
        TaskFamily::Sandbox => {
            return Err(Error::UnsupportedFamily {
                family: family.to_string(),
                operation: "sample_tasks (sandbox tasks come from a mixture taskset)",
            })
        }
    };
    Task::new(family, payload, false)
}

/// `count` i.i.d. tasks from the family's nominal distribution.
pub fn sample_tasks<R: Rng + ?Sized>(
    family: TaskFamily,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Task>> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "task count must be at least 1".into(),
        ));
    }
    (0..count).map(|_| sample_nominal(family, rng)).collect()
}

/// Like [`sample_tasks`], but each task is independently replaced by a noise
/// task with probability `noise.fraction`. Only `point_vel` supports noise.
pub fn sample_tasks_noisy<R: Rng + ?Sized>(
    family: TaskFamily,
    count: usize,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<Task>> {
    if family != TaskFamily::PointVel {
        return Err(Error::UnsupportedFamily {
            family: family.to_string(),
            operation: "sample_tasks_noisy",
        });
    }
    noise.validate()?;
    if count == 0 {
        return Err(Error::InvalidArgument(
            "task count must be at least 1".into(),
        ));
    }
    (0..count)
        .map(|_| {
            if noise.fraction > 0.0 && rng.random_bool(noise.fraction) {
                Task::new(family, vec![rng.random_range(noise.low..=noise.high)], true)
            } else {
                sample_nominal(family, rng)
            }
        })
        .collect()
}

/// Where a meta-learner draws its training or evaluation tasks from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskSource {
    Nominal(TaskFamily),
    Noisy(TaskFamily, NoiseSpec),
}

impl TaskSource {
    pub fn family(&self) -> TaskFamily {
        match self {
            TaskSource::Nominal(f) | TaskSource::Noisy(f, _) => *f,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Task>> {
        match self {
            TaskSource::Nominal(f) => sample_tasks(*f, count, rng),
            TaskSource::Noisy(f, noise) => sample_tasks_noisy(*f, count, noise, rng),
        }
    }

    /// The same family without noise injection (the test-time distribution).
    pub fn nominal(&self) -> TaskSource {
        TaskSource::Nominal(self.family())
    }
}

/// Serializes tasks one per line: `family payload... is_noise`.
pub fn tasks_to_text(tasks: &[Task]) -> String {
    let mut out = String::new();
    for t in tasks {
        out.push_str(t.family.name());
        for v in &t.payload {
            out.push(' ');
            out.push_str(&v.to_string());
        }
        out.push_str(if t.is_noise { " 1\n" } else { " 0\n" });
    }
    out
}

/// Parses the format written by [`tasks_to_text`]. Blank lines and lines
/// starting with `#` are skipped.
pub fn tasks_from_text(text: &str) -> Result<Vec<Task>> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let family: TaskFamily = fields[0]
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let expected = family.payload_dim() + 2;
        if fields.len() != expected {
            return Err(parse_err(format!(
                "expected {expected} fields for {family}, found {}",
                fields.len()
            )));
        }
        let payload = fields[1..expected - 1]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| parse_err(format!("`{f}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let is_noise = match fields[expected - 1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(parse_err(format!(
                    "noise flag must be 0 or 1, got `{other}`"
                )))
            }
        };
        tasks.push(Task::new(family, payload, is_noise).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(tasks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn point_vel_sampling_is_uniform_on_0_2() {
        let tasks = sample_tasks(TaskFamily::PointVel, 1000, &mut Stream::root(1).rng()).unwrap();
        assert!(tasks
            .iter()
            .all(|t| (0.0..=2.0).contains(&t.payload[0]) && !t.is_noise));
        let mean = tasks.iter().map(|t| t.payload[0]).sum::<f64>() / 1000.0;
        assert!((mean - 1.0).abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn seeded_sampling_is_repeatable() {
        let a = sample_tasks(TaskFamily::Nav2d, 1, &mut Stream::root(5).rng()).unwrap();
        let b = sample_tasks(TaskFamily::Nav2d, 1, &mut Stream::root(5).rng()).unwrap();
        assert_eq!(a, b);
        assert!(a[0].payload.iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(sample_tasks(TaskFamily::Nav2d, 0, &mut Stream::root(0).rng()).is_err());
    }

    #[test]
    fn noise_fraction_within_binomial_band() {
        let noise = NoiseSpec::default();
        let tasks = sample_tasks_noisy(
            TaskFamily::PointVel,
            10_000,
            &noise,
            &mut Stream::root(2).rng(),
        )
        .unwrap();
        let n_noise = tasks.iter().filter(|t| t.is_noise).count();
        assert!((1880..=2120).contains(&n_noise), "{n_noise}");
        for t in &tasks {
            if t.is_noise {
                assert!((3.0..=4.0).contains(&t.payload[0]));
            } else {
                assert!((0.0..=2.0).contains(&t.payload[0]));
            }
        }
    }

    #[test]
    fn zero_noise_matches_nominal_sampling() {
        let noise = NoiseSpec {
            fraction: 0.0,
            ..NoiseSpec::default()
        };
        let a = sample_tasks_noisy(TaskFamily::PointVel, 50, &noise, &mut Stream::root(3).rng())
            .unwrap();
        let b = sample_tasks(TaskFamily::PointVel, 50, &mut Stream::root(3).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noisy_sampling_rejects_other_families() {
        let r = sample_tasks_noisy(
            TaskFamily::Nav2d,
            5,
            &NoiseSpec::default(),
            &mut Stream::root(0).rng(),
        );
        assert!(matches!(r, Err(Error::UnsupportedFamily { .. })));
    }

    #[test]
    fn nav2d_at_goal_has_zero_reward() {
        let cfg = EnvConfig::default();
        let task = Task::new(TaskFamily::Nav2d, vec![0.0, 0.0], false).unwrap();
        let s = env_reset(&task).unwrap();
        let (_, r) = env_step(&cfg, &task, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn nav2d_single_step_toward_goal() {
        let cfg = EnvConfig::default();
        let task = Task::new(TaskFamily::Nav2d, vec![1.0, 0.0], false).unwrap();
        let s = env_reset(&task).unwrap();
        let (next, r) = env_step(&cfg, &task, &s, &[0.1, 0.0]).unwrap();
        assert!((r + 0.9).abs() < 1e-15);
        assert_eq!(next.observation, vec![0.1, 0.0]);
        // clipping
        let (next, _) = env_step(&cfg, &task, &s, &[5.0, -5.0]).unwrap();
        assert_eq!(next.observation, vec![0.1, -0.1]);
    }

    #[test]
    fn point_vel_on_target_has_zero_reward() {
        let cfg = EnvConfig::default();
        let task = Task::new(TaskFamily::PointVel, vec![1.5], false).unwrap();
        let s = EnvState {
            observation: vec![1.5, 0.0],
            step_count: 3,
            done: false,
        };
        let (_, r) = env_step(&cfg, &task, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn horizon_is_exact_and_done_cannot_step() {
        let cfg = EnvConfig::default();
        let task = Task::new(TaskFamily::PointVel, vec![1.0], false).unwrap();
        let mut s = env_reset(&task).unwrap();
        let mut steps = 0;
        while !s.done {
            let (next, r) = env_step(&cfg, &task, &s, &[0.3, -0.2]).unwrap();
            assert!(r <= 0.0);
            s = next;
            steps += 1;
        }
        assert_eq!(steps, cfg.horizon);
        assert!(matches!(
            env_step(&cfg, &task, &s, &[0.0, 0.0]),
            Err(Error::EpisodeDone { .. })
        ));
    }

    #[test]
    fn task_text_round_trip_and_errors() {
        let tasks = vec![
            Task::new(TaskFamily::Nav2d, vec![0.25, -0.125], false).unwrap(),
            Task::new(TaskFamily::PointVel, vec![3.7], true).unwrap(),
            Task::new(TaskFamily::Sandbox, vec![0.1, 1e-17], true).unwrap(),
        ];
        let text = tasks_to_text(&tasks);
        assert_eq!(tasks_from_text(&text).unwrap(), tasks);
        assert!(matches!(
            tasks_from_text("# header\n\nnav2d 0.1 0\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(tasks_from_text("walker 1 0\n").is_err());
        assert!(tasks_from_text("point_vel 1.0 yes\n").is_err());
    }
}
