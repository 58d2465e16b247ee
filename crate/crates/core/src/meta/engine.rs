use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::AlphaParams;
use super::config::MetaConfig;
use super::hyper::{alpha_hypergradient, alpha_update, limit_hypergradient};
use crate::diffcore::{grad, inner_adapt, meta_grad_from_outer, ParamVector};
use crate::envs::{EnvConfig, Task, TaskSource};
use crate::error::{Error, Result, Snapshot};
use crate::policy::{rollout, GaussianPolicy, ReinforceLoss, SurrogateLoss};
use crate::ptb::{l_at, PtbEntry, TaskBuffer};
use crate::rng::Stream;

/// What is being meta-learned: the policy family, the environment constants
/// and the training task distribution.
#[derive(Debug, Clone)]
pub struct MetaProblem {
    pub policy: GaussianPolicy,
    pub env: EnvConfig,
    pub source: TaskSource,
}

/// Metrics of one meta-iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean undiscounted return of the pre-adaptation (train) rollouts.
    pub train_return: f64,
    /// Mean undiscounted return of the post-adaptation (validation) rollouts.
    pub val_return: f64,
    /// Tasks served from the buffer.
    pub l: usize,
    pub alpha_min: f64,
    pub alpha_mean: f64,
    pub alpha_max: f64,
    pub wall_ms: f64,
}

/// One row of the per-iteration buffer dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferRow {
    pub task: Task,
    pub val_return: f64,
    pub selected: bool,
}

#[derive(Debug, Clone)]
pub struct MetaState {
    pub theta: ParamVector,
    pub alpha: AlphaParams,
    pub buffer: TaskBuffer,
    pub iteration: usize,
    pub history: Vec<IterationRecord>,
    /// Buffer contents seen at the start of the last RMAML iteration, with
    /// the entries it served flagged.
    pub last_buffer: Vec<BufferRow>,
}

impl MetaState {
    /// Random θ from the seed's `init` stream and α at `alpha_init`.
    pub fn init(problem: &MetaProblem, config: &MetaConfig, log_std_init: f64) -> Result<Self> {
        config.validate()?;
        let theta = problem
            .policy
            .init_params(log_std_init, Stream::root(config.seed).named("init"));
        let alpha = AlphaParams::filled(
            config.alpha_granularity,
            config.alpha_init,
            &theta,
            config.alpha_floor,
        )?;
        Ok(MetaState {
            theta,
            alpha,
            buffer: TaskBuffer::new(),
            iteration: 0,
            history: Vec::new(),
            last_buffer: Vec::new(),
        })
    }

    fn snapshot(&self, cause: &Error) -> Error {
        Error::NumericAbort(Box::new(Snapshot {
            iteration: self.iteration,
            theta: self.theta.values().to_vec(),
            alpha: self.alpha.values().to_vec(),
            cause: cause.to_string(),
        }))
    }
}

/// Per-task results of the inner loop.
struct TaskOutcome {
    train_return: f64,
    val_return: f64,
    train_grad: ParamVector,
    val_grad: ParamVector,
    meta_grad: ParamVector,
}

fn adapt_and_validate(
    problem: &MetaProblem,
    config: &MetaConfig,
    state: &MetaState,
    task: &Task,
    streams: (Stream, Stream),
) -> Result<TaskOutcome> {
    let policy = &problem.policy;
    let theta = &state.theta;
    let train = rollout(
        policy,
        &problem.env,
        theta,
        task,
        config.k_trajectories,
        streams.0,
    )?;
    let inner = ReinforceLoss::new(policy, &train, config.discount);
    let train_grad = grad(&inner, theta).map_err(|e| phase(e, "inner grad"))?;
    let adapted = inner_adapt(theta, &train_grad, &state.alpha)?;
    let val = rollout(
        policy,
        &problem.env,
        &adapted,
        task,
        config.k_trajectories,
        streams.1,
    )?;
    let outer = SurrogateLoss::new(policy, &adapted, &val, config.clip, config.discount)?;
    let val_grad = grad(&outer, &adapted).map_err(|e| phase(e, "outer grad"))?;
    let meta_grad = meta_grad_from_outer(&inner, theta, &state.alpha, &val_grad, config.grad_mode)?;
    Ok(TaskOutcome {
        train_return: train.mean_return(),
        val_return: val.mean_return(),
        train_grad,
        val_grad,
        meta_grad,
    })
}

fn phase(err: Error, name: &str) -> Error {
    match err {
        Error::NonFinite { phase, value } => Error::non_finite(format!("{name}: {phase}"), value),
        other => other,
    }
}

/// Inner loop over `tasks`, outer update of θ and (optionally) α.
/// Returns the per-task validation returns.
fn meta_step(
    problem: &MetaProblem,
    config: &MetaConfig,
    state: &mut MetaState,
    tasks: &[Task],
    update_alpha: bool,
    l: usize,
) -> Result<Vec<f64>> {
    let started = Instant::now();
    let rollouts = Stream::root(config.seed).named("rollout");
    let iteration = state.iteration as u64;
    let shared: &MetaState = state;
    let run = |(i, task): (usize, &Task)| {
        let streams = (
            rollouts.path(&[iteration, i as u64, 0]),
            rollouts.path(&[iteration, i as u64, 1]),
        );
        adapt_and_validate(problem, config, shared, task, streams)
    };
    let outcomes: Result<Vec<TaskOutcome>> = if config.parallel {
        tasks.par_iter().enumerate().map(run).collect()
    } else {
        tasks.iter().enumerate().map(run).collect()
    };
    let outcomes = match outcomes {
        Ok(o) => o,
        Err(e @ Error::NonFinite { .. }) => return Err(state.snapshot(&e)),
        Err(e) => return Err(e),
    };

    // Fixed task order keeps the reduction independent of scheduling.
    let mut total = state.theta.zeros_like();
    for o in &outcomes {
        total.axpy(1.0, &o.meta_grad);
    }
    log::debug!(
        "iteration {}: meta-gradient norm {:.4e}, hyper dot {:.4e}",
        state.iteration,
        total.norm(),
        outcomes
            .iter()
            .map(|o| o.val_grad.dot(&o.train_grad))
            .sum::<f64>()
    );
    let mut scale = 1.0;
    if let Some(limit) = config.max_grad_norm {
        let norm = total.norm();
        if norm > limit {
            scale = limit / norm;
        }
    }
    let mut theta = state.theta.clone();
    theta.axpy(-config.beta * scale, &total);
    if !theta.is_finite() {
        let value = theta
            .values()
            .iter()
            .copied()
            .find(|v| !v.is_finite())
            .unwrap_or(f64::NAN);
        return Err(state.snapshot(&Error::non_finite("outer update of theta", value)));
    }

    let alpha = if update_alpha {
        let val_grads: Vec<ParamVector> = outcomes.iter().map(|o| o.val_grad.clone()).collect();
        let train_grads: Vec<ParamVector> = outcomes.iter().map(|o| o.train_grad.clone()).collect();
        let step = alpha_hypergradient(&val_grads, &train_grads, state.alpha.granularity())
            .map(|h| match config.alpha_max_step {
                Some(max_step) => limit_hypergradient(&state.alpha, &h, config.alpha0, max_step),
                None => h,
            })
            .and_then(|h| alpha_update(&state.alpha, &h, config.alpha0));
        match step {
            Ok(a) => a,
            Err(e @ Error::NonFinite { .. }) => return Err(state.snapshot(&e)),
            Err(e) => return Err(e),
        }
    } else {
        state.alpha.clone()
    };

    let n = outcomes.len() as f64;
    let record = IterationRecord {
        iteration: state.iteration,
        train_return: outcomes.iter().map(|o| o.train_return).sum::<f64>() / n,
        val_return: outcomes.iter().map(|o| o.val_return).sum::<f64>() / n,
        l,
        alpha_min: alpha.min(),
        alpha_mean: alpha.mean(),
        alpha_max: alpha.max(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    state.theta = theta;
    state.alpha = alpha;
    state.history.push(record);
    state.iteration += 1;
    Ok(outcomes.iter().map(|o| o.val_return).collect())
}

fn sample_uniform(
    config: &MetaConfig,
    source: &TaskSource,
    iteration: usize,
    count: usize,
) -> Result<Vec<Task>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut rng = Stream::root(config.seed)
        .named("tasks")
        .child(iteration as u64)
        .rng();
    source.sample(count, &mut rng)
}

/// One MAML iteration: M uniform tasks, one inner step each with the fixed
/// α, and an outer step `θ ← θ − β Σ_i ∇θ L_val,i(θ'_i)`.
pub fn maml_iteration(
    problem: &MetaProblem,
    config: &MetaConfig,
    state: &mut MetaState,
) -> Result<IterationRecord> {
    let tasks = sample_uniform(
        config,
        &problem.source,
        state.iteration,
        config.meta_batch_size,
    )?;
    meta_step(problem, config, state, &tasks, false, 0)?;
    Ok(state.history.last().cloned().expect("record pushed"))
}

/// One RMAML iteration.
///
/// `l = l_at(schedule, iteration)` tasks come from the buffer (fewer if it
/// holds fewer), the remaining `M − l` uniformly from the task source. The
/// buffer is then emptied, the meta step runs as in MAML, α is updated by
/// its hypergradient (unless disabled), and every task is stored back with
/// its validation return.
pub fn rmaml_iteration(
    problem: &MetaProblem,
    config: &MetaConfig,
    state: &mut MetaState,
) -> Result<IterationRecord> {
    let l = l_at(&config.schedule(), state.iteration).min(state.buffer.len());
    let mut rng = Stream::root(config.seed)
        .named("buffer")
        .child(state.iteration as u64)
        .rng();
    let picked = state.buffer.select_indices(l, config.strategy, &mut rng)?;
    let mut selected = vec![false; state.buffer.len()];
    for &i in &picked {
        selected[i] = true;
    }
    state.last_buffer = state
        .buffer
        .entries()
        .iter()
        .zip(selected)
        .map(|(e, selected)| BufferRow {
            task: e.task.clone(),
            val_return: e.val_return,
            selected,
        })
        .collect();

    let mut tasks: Vec<Task> = picked
        .iter()
        .map(|&i| state.buffer.entries()[i].task.clone())
        .collect();
    tasks.extend(sample_uniform(
        config,
        &problem.source,
        state.iteration,
        config.meta_batch_size - l,
    )?);
    state.buffer.clear();

    let val_returns = meta_step(problem, config, state, &tasks, config.alpha_update, l)?;
    state.buffer.store(
        tasks
            .into_iter()
            .zip(val_returns)
            .map(|(task, val_return)| PtbEntry { task, val_return })
            .collect(),
    )?;
    Ok(state.history.last().cloned().expect("record pushed"))
}
