//! Geometric 2D reaching study.
//!
//! The "model" is a point in the plane and a perfect meta-learner moves it a
//! fixed fraction of the way toward each sampled task. Tasks come from a
//! mixture of three Gaussians: a large main component and two small noise
//! components. Training follows the RMAML loop exactly, with the shared
//! [`crate::ptb`] buffer scoring tasks by negative distance to the adapted
//! point, so the four selection strategies can be compared without any
//! neural network.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::envs::{Task, TaskFamily};
use crate::error::{Error, Result};
use crate::ptb::{l_at, LSchedule, PtbEntry, Strategy, TaskBuffer};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: [f64; 2],
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        MixtureSpec {
            components: vec![
                MixtureComponent {
                    mean: [0.0, 0.0],
                    std: 0.5,
                    count: 200,
                },
                MixtureComponent {
                    mean: [3.0, 3.0],
                    std: 0.3,
                    count: 50,
                },
                MixtureComponent {
                    mean: [3.0, -3.0],
                    std: 0.3,
                    count: 50,
                },
            ],
        }
    }
}

impl MixtureSpec {
    /// Three components: one main component of 200 tasks and two noise
    /// components of 50.
    pub fn validate(&self) -> Result<()> {
        if self.components.len() != 3 {
            return Err(Error::config(
                "mixture.components",
                format!("expected 3 components, found {}", self.components.len()),
            ));
        }
        let mut counts: Vec<usize> = self.components.iter().map(|c| c.count).collect();
        counts.sort_unstable();
        if counts != [50, 50, 200] {
            return Err(Error::config(
                "mixture.components",
                format!("component counts must be (200, 50, 50), got {counts:?}"),
            ));
        }
        for c in &self.components {
            if !(c.std >= 0.0 && c.std.is_finite()) || c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(
                    "mixture.components",
                    "means must be finite and std finite and >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Index of the main (largest) component.
    pub fn main_index(&self) -> usize {
        self.components
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| c.count)
            .map(|(i, _)| i)
            .expect("non-empty mixture")
    }

    pub fn main_mean(&self) -> [f64; 2] {
        self.components[self.main_index()].mean
    }
}

/// Draws every component's points; tasks off the main component are
/// flagged as noise. Points are ordered component by component.
pub fn generate_taskset<R: Rng + ?Sized>(spec: &MixtureSpec, rng: &mut R) -> Result<Vec<Task>> {
    spec.validate()?;
    let main = spec.main_index();
    let mut tasks = Vec::with_capacity(300);
    for (k, c) in spec.components.iter().enumerate() {
        let normal = Normal::new(0.0, c.std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for _ in 0..c.count {
            let p = vec![
                c.mean[0] + normal.sample(rng),
                c.mean[1] + normal.sample(rng),
            ];
            tasks.push(Task::new(TaskFamily::Sandbox, p, k != main)?);
        }
    }
    Ok(tasks)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: [f64; 2],
    pub iteration: usize,
}

fn distance(a: [f64; 2], b: &[f64]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Moves the agent `rate` of the way toward the task.
pub fn perfect_maml_step(agent: &AgentState, task: &Task, rate: f64) -> AgentState {
    let p = agent.position;
    AgentState {
        position: [
            p[0] + rate * (task.payload[0] - p[0]),
            p[1] + rate * (task.payload[1] - p[1]),
        ],
        iteration: agent.iteration,
    }
}

/// Distance between the adapted agent and the task (lower is easier).
pub fn priority_score(agent_after: &AgentState, task: &Task) -> f64 {
    distance(agent_after.position, &task.payload)
}

/// Parameters of a strategy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    pub mixture: MixtureSpec,
    pub strategies: Vec<Strategy>,
    pub iterations: usize,
    pub meta_batch_size: usize,
    /// Largest number of buffer-served tasks; defaults to M/4.
    pub max_l: Option<usize>,
    pub rate: f64,
    pub agent_start: [f64; 2],
    pub seeds: Vec<u64>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            mixture: MixtureSpec::default(),
            strategies: Strategy::ALL.to_vec(),
            iterations: 200,
            meta_batch_size: 20,
            max_l: None,
            rate: 0.1,
            agent_start: [2.0, 0.0],
            seeds: (0..50).collect(),
        }
    }
}

impl SandboxConfig {
    pub fn schedule(&self) -> LSchedule {
        LSchedule {
            max_l: self.max_l.unwrap_or(self.meta_batch_size / 4),
            total_iterations: self.iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mixture.validate()?;
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be positive"));
        }
        if self.meta_batch_size == 0 {
            return Err(Error::config("meta_batch_size", "must be positive"));
        }
        if self.schedule().max_l > self.meta_batch_size {
            return Err(Error::config("max_l", "exceeds meta_batch_size"));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::config("rate", "must lie in (0, 1]"));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("strategies", "list is empty"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "list is empty"));
        }
        Ok(())
    }
}

/// One (strategy, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub strategy: Strategy,
    pub seed: u64,
    /// Agent position after each iteration, starting with the initial one.
    pub trace: Vec<[f64; 2]>,
    pub final_distance: f64,
    /// Final position lies inside the convex hull of the component whose
    /// mean is nearest to it.
    pub captured: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub main_mean: [f64; 2],
    pub trials: Vec<Trial>,
}

impl Comparison {
    pub fn trials_for(&self, strategy: Strategy) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(move |t| t.strategy == strategy)
    }

    pub fn final_distances(&self, strategy: Strategy) -> Vec<f64> {
        self.trials_for(strategy)
            .map(|t| t.final_distance)
            .collect()
    }

    /// `strategy,seed,iteration,x,y,dist_to_main`
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("strategy,seed,iteration,x,y,dist_to_main\n");
        for t in &self.trials {
            for (i, p) in t.trace.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t.strategy,
                    t.seed,
                    i,
                    p[0],
                    p[1],
                    distance(*p, &self.main_mean)
                );
            }
        }
        out
    }
}

/// Trains one agent with the RMAML loop under `strategy`.
pub fn run_trial(
    config: &SandboxConfig,
    taskset: &[Task],
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<[f64; 2]>> {
    let schedule = config.schedule();
    let root = Stream::root(seed);
    let mut agent = AgentState {
        position: config.agent_start,
        iteration: 0,
    };
    let mut buffer = TaskBuffer::new();
    let mut trace = Vec::with_capacity(config.iterations + 1);
    trace.push(agent.position);
    for it in 0..config.iterations {
        let l = l_at(&schedule, it).min(buffer.len());
        let mut tasks = buffer.select(
            l,
            strategy,
            &mut root.named("buffer").child(it as u64).rng(),
        )?;
        // Shared across strategies: the same uniform draws for a given seed.
        let mut rng = root.named("tasks").child(it as u64).rng();
        tasks.extend(
            (0..config.meta_batch_size - l)
                .map(|_| taskset[rng.random_range(0..taskset.len())].clone()),
        );
        buffer.clear();

        let adapted: Vec<AgentState> = tasks
            .iter()
            .map(|t| perfect_maml_step(&agent, t, config.rate))
            .collect();
        let n = adapted.len() as f64;
        agent = AgentState {
            position: [
                adapted.iter().map(|a| a.position[0]).sum::<f64>() / n,
                adapted.iter().map(|a| a.position[1]).sum::<f64>() / n,
            ],
            iteration: it + 1,
        };
        buffer.store(
            tasks
                .into_iter()
                .zip(&adapted)
                .map(|(task, a)| PtbEntry {
                    val_return: -priority_score(a, &task),
                    task,
                })
                .collect(),
        )?;
        trace.push(agent.position);
    }
    Ok(trace)
}

/// Runs every strategy on every seed. Within a seed all strategies share
/// the taskset and the uniform task draws.
pub fn run_strategy_comparison(config: &SandboxConfig) -> Result<Comparison> {
    config.validate()?;
    let main_mean = config.mixture.main_mean();
    let mut trials = Vec::new();
    for &seed in &config.seeds {
        let taskset = generate_taskset(
            &config.mixture,
            &mut Stream::root(seed).named("taskset").rng(),
        )?;
        let clusters: Vec<Vec<[f64; 2]>> = (0..config.mixture.components.len())
            .map(|k| {
                let start: usize = config.mixture.components[..k].iter().map(|c| c.count).sum();
                taskset[start..start + config.mixture.components[k].count]
                    .iter()
                    .map(|t| [t.payload[0], t.payload[1]])
                    .collect()
            })
            .collect();
        for &strategy in &config.strategies {
            let trace = run_trial(config, &taskset, strategy, seed)?;
            let last = *trace.last().expect("trace holds the start");
            let nearest = config
                .mixture
                .components
                .iter()
                .enumerate()
                .min_by(|a, b| distance(last, &a.1.mean).total_cmp(&distance(last, &b.1.mean)))
                .map(|(k, _)| k)
                .expect("three components");
            trials.push(Trial {
                strategy,
                seed,
                final_distance: distance(last, &main_mean),
                captured: in_convex_hull(&clusters[nearest], last),
                trace,
            });
        }
    }
    Ok(Comparison { main_mean, trials })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Whether `p` lies inside (or on) the convex hull of `points`.
pub fn in_convex_hull(points: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts.contains(&p);
    }
    // Andrew's monotone chain, counter-clockwise.
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &q in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0
            {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], p) >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(x: f64, y: f64) -> Task {
        Task::new(TaskFamily::Sandbox, vec![x, y], false).unwrap()
    }

    #[test]
    fn default_taskset_counts() {
        let spec = MixtureSpec::default();
        let tasks = generate_taskset(&spec, &mut Stream::root(1).rng()).unwrap();
        assert_eq!(tasks.len(), 300);
        assert_eq!(tasks.iter().filter(|t| t.is_noise).count(), 100);
        // main-component sample mean within 3·std/√200 of its mean
        let main: Vec<&Task> = tasks.iter().filter(|t| !t.is_noise).collect();
        let bound = 3.0 * 0.5 / 200f64.sqrt();
        for d in 0..2 {
            let m = main.iter().map(|t| t.payload[d]).sum::<f64>() / 200.0;
            assert!(m.abs() <= bound, "axis {d}: {m}");
        }
    }

    #[test]
    fn zero_std_collapses_components() {
        let mut spec = MixtureSpec::default();
        for c in &mut spec.components {
            c.std = 0.0;
        }
        let tasks = generate_taskset(&spec, &mut Stream::root(1).rng()).unwrap();
        assert!(tasks[..200].iter().all(|t| t.payload == vec![0.0, 0.0]));
        assert!(tasks[200..250].iter().all(|t| t.payload == vec![3.0, 3.0]));
    }

    #[test]
    fn mixture_validation() {
        let mut spec = MixtureSpec::default();
        spec.components[1].count = 60;
        assert!(spec.validate().is_err());
        spec.components.pop();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn step_examples() {
        let a = AgentState {
            position: [0.0, 0.0],
            iteration: 0,
        };
        assert_eq!(
            perfect_maml_step(&a, &task(1.0, 0.0), 0.1).position,
            [0.1, 0.0]
        );
        assert_eq!(
            perfect_maml_step(&a, &task(1.5, -2.0), 1.0).position,
            [1.5, -2.0]
        );
        let t = task(1.0, 1.0);
        let once = perfect_maml_step(&a, &t, 0.5);
        let twice = perfect_maml_step(&once, &t, 0.5);
        let d0 = priority_score(&a, &t);
        assert!((priority_score(&twice, &t) - d0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn score_examples() {
        let a = AgentState {
            position: [0.0, 0.0],
            iteration: 0,
        };
        assert_eq!(priority_score(&a, &task(0.0, 0.0)), 0.0);
        assert_eq!(priority_score(&a, &task(3.0, 4.0)), 5.0);
        let t = task(3.0, 4.0);
        let after = perfect_maml_step(&a, &t, 0.3);
        assert!((priority_score(&after, &t) - 0.7 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_taskset_attracts_every_strategy() {
        let mut config = SandboxConfig {
            seeds: vec![0, 1],
            ..SandboxConfig::default()
        };
        for c in &mut config.mixture.components {
            c.std = 0.0;
            c.mean = [0.5, -0.5];
        }
        let result = run_strategy_comparison(&config).unwrap();
        for t in &result.trials {
            let last = t.trace.last().unwrap();
            assert!((last[0] - 0.5).abs() < 1e-6 && (last[1] + 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn hull_membership() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        assert!(in_convex_hull(&square, [0.2, 0.7]));
        assert!(in_convex_hull(&square, [1.0, 0.5]));
        assert!(!in_convex_hull(&square, [1.1, 0.5]));
        assert!(!in_convex_hull(&[[0.0, 0.0], [1.0, 1.0]], [0.5, 0.5]));
    }

    #[test]
    fn trace_csv_layout() {
        let config = SandboxConfig {
            seeds: vec![3],
            iterations: 5,
            strategies: vec![Strategy::Medium],
            ..SandboxConfig::default()
        };
        let csv = run_strategy_comparison(&config).unwrap().trace_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "strategy,seed,iteration,x,y,dist_to_main");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("medium,3,0,2,0,2"));
    }
}
