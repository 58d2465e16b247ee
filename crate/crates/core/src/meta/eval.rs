use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::alpha::AlphaParams;
use super::engine::MetaProblem;
use crate::diffcore::{grad, inner_adapt, ParamVector};
use crate::envs::TaskSource;
use crate::error::Result;
use crate::policy::{rollout, ReinforceLoss};
use crate::rng::Stream;

/// Settings of the evaluation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_tasks: usize,
    pub n_rollouts: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_tasks: 40,
            n_rollouts: 20,
        }
    }
}

/// Step-0 / step-1 average returns over all evaluation rollouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub step0: f64,
    pub step1: f64,
    /// Standard error of `step0` over its rollouts.
    pub step0_se: f64,
    pub step1_se: f64,
    /// Standard error of `step1 − step0`.
    pub gap_se: f64,
    pub n_tasks: usize,
    pub n_rollouts: usize,
    /// Number of unadapted rollouts (`n_tasks · n_rollouts`).
    pub step0_rollouts: usize,
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Meta-test protocol: sample `n_tasks` tasks; on each, roll out
/// `n_rollouts` episodes with θ (step 0), take one REINFORCE step on those
/// episodes with α, and roll out `n_rollouts` episodes with the adapted
/// parameters (step 1).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_protocol(
    problem: &MetaProblem,
    theta: &ParamVector,
    alpha: &AlphaParams,
    source: &TaskSource,
    eval: &EvalConfig,
    discount: f64,
    stream: Stream,
    parallel: bool,
) -> Result<EvalResult> {
    let tasks = source.sample(eval.n_tasks, &mut stream.named("tasks").rng())?;
    let per_task = |(j, task): (usize, &crate::envs::Task)| -> Result<(Vec<f64>, Vec<f64>)> {
        let pre = rollout(
            &problem.policy,
            &problem.env,
            theta,
            task,
            eval.n_rollouts,
            stream.named("step0").child(j as u64),
        )?;
        let g = grad(&ReinforceLoss::new(&problem.policy, &pre, discount), theta)?;
        let adapted = inner_adapt(theta, &g, alpha)?;
        let post = rollout(
            &problem.policy,
            &problem.env,
            &adapted,
            task,
            eval.n_rollouts,
            stream.named("step1").child(j as u64),
        )?;
        Ok((pre.returns(), post.returns()))
    };
    let results: Vec<(Vec<f64>, Vec<f64>)> = if parallel {
        tasks
            .par_iter()
            .enumerate()
            .map(per_task)
            .collect::<Result<_>>()?
    } else {
        tasks
            .iter()
            .enumerate()
            .map(per_task)
            .collect::<Result<_>>()?
    };
    let step0: Vec<f64> = results.iter().flat_map(|r| r.0.iter().copied()).collect();
    let step1: Vec<f64> = results.iter().flat_map(|r| r.1.iter().copied()).collect();
    let (m0, se0) = mean_and_se(&step0);
    let (m1, se1) = mean_and_se(&step1);
    Ok(EvalResult {
        step0: m0,
        step1: m1,
        step0_se: se0,
        step1_se: se1,
        gap_se: (se0 * se0 + se1 * se1).sqrt(),
        n_tasks: eval.n_tasks,
        n_rollouts: eval.n_rollouts,
        step0_rollouts: step0.len(),
    })
}
