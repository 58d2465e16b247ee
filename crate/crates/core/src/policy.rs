//! Gaussian MLP policy, trajectory collection, and the two policy-gradient
//! losses used by the meta-learners: REINFORCE for the inner step and a
//! clipped importance-sampling surrogate for the outer step.

use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diffcore::{Activation, LayerSlice, MlpSpec, Objective, ParamVector, Scalar};
use crate::envs::{env_reset, env_step, EnvConfig, Task};
use crate::error::{Error, Result};
use crate::rng::Stream;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Gaussian policy whose mean is an MLP of the observation and whose
/// log-std is a learned, state-independent vector.
///
/// Parameter layout: the MLP's dense layers followed by one extra layer
/// holding the log-std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    net: MlpSpec,
}

/// Action distribution at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDist {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        hidden_sizes: Vec<usize>,
        activation: Activation,
    ) -> Result<Self> {
        Ok(GaussianPolicy {
            net: MlpSpec::new(obs_dim, hidden_sizes, action_dim, activation)?,
        })
    }

    pub fn net(&self) -> &MlpSpec {
        &self.net
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.net.output_dim
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count() + self.action_dim()
    }

    fn layout(&self) -> (Vec<LayerSlice>, Vec<usize>) {
        let mut layers = self.net.layer_map();
        let offset = self.net.param_count();
        layers.push(LayerSlice {
            layer_id: layers.len(),
            offset,
            len: self.action_dim(),
        });
        (layers, self.net.layer_sizes())
    }

    pub fn params_from(&self, values: Vec<f64>) -> Result<ParamVector> {
        if values.len() != self.param_count() {
            return Err(Error::dim(
                "policy parameters",
                self.param_count(),
                values.len(),
            ));
        }
        let (layers, shape) = self.layout();
        ParamVector::new(values, layers, shape)
    }

    /// Random network weights (small output layer) and log-std `log_std_init`.
    pub fn init_params(&self, log_std_init: f64, stream: Stream) -> ParamVector {
        let net = self.net.init_params(0.1, &mut stream.rng());
        let mut values = net.into_values();
        values.extend(std::iter::repeat_n(log_std_init, self.action_dim()));
        self.params_from(values).expect("layout matches")
    }

    fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::dim(
                "policy parameters",
                self.param_count(),
                params.len(),
            ));
        }
        Ok(())
    }

    pub fn distribution(&self, params: &ParamVector, observation: &[f64]) -> Result<PolicyDist> {
        self.check_params(params)?;
        if observation.len() != self.obs_dim() {
            return Err(Error::dim("observation", self.obs_dim(), observation.len()));
        }
        let values = params.values();
        let cache = self.net.forward_cached(values, observation);
        Ok(PolicyDist {
            mean: cache.output().to_vec(),
            log_std: values[self.net.param_count()..].to_vec(),
        })
    }

    /// Log-density of `action` and its derivative coefficients.
    ///
    /// Returns `(log π(a|s), ∂/∂mean, ∂/∂log_std)`.
    fn log_prob_terms<S: Scalar>(
        &self,
        mean: &[S],
        log_std: &[S],
        action: &[f64],
    ) -> (S, Vec<S>, Vec<S>) {
        let mut logp = S::zero();
        let mut d_mean = Vec::with_capacity(action.len());
        let mut d_log_std = Vec::with_capacity(action.len());
        for ((&m, &ls), &a) in mean.iter().zip(log_std).zip(action) {
            let inv_std = (-ls).exp();
            let z = (S::constant(a) - m) * inv_std;
            logp += (z * z).scale(-0.5) - ls - S::constant(HALF_LN_2PI);
            d_mean.push(z * inv_std);
            d_log_std.push(z * z - S::constant(1.0));
        }
        (logp, d_mean, d_log_std)
    }

    /// `log π(a|s)` under `params`.
    pub fn log_prob(
        &self,
        params: &ParamVector,
        observation: &[f64],
        action: &[f64],
    ) -> Result<f64> {
        let dist = self.distribution(params, observation)?;
        if action.len() != self.action_dim() {
            return Err(Error::dim("action", self.action_dim(), action.len()));
        }
        Ok(self.log_prob_terms(&dist.mean, &dist.log_std, action).0)
    }
}

/// One episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.rewards.len()
    }

    /// Undiscounted return.
    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Trajectories collected on a single task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryBatch {
    pub task: Task,
    pub trajectories: Vec<Trajectory>,
}

impl TrajectoryBatch {
    pub fn new(task: Task, trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::InvalidArgument("trajectory batch is empty".into()));
        }
        let h = trajectories[0].horizon();
        for t in &trajectories {
            if t.horizon() != h || t.observations.len() != h || t.actions.len() != h {
                return Err(Error::dim("trajectory length", h, t.horizon()));
            }
            if let Some(r) = t.rewards.iter().find(|r| !r.is_finite()) {
                return Err(Error::non_finite("trajectory reward", *r));
            }
        }
        Ok(TrajectoryBatch { task, trajectories })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Mean undiscounted return over trajectories.
    pub fn mean_return(&self) -> f64 {
        self.returns().iter().sum::<f64>() / self.len() as f64
    }

    pub fn returns(&self) -> Vec<f64> {
        self.trajectories
            .iter()
            .map(Trajectory::total_return)
            .collect()
    }

    /// One step per row: `traj step obs... action... reward return_to_go`.
    pub fn to_columnar_text(&self, discount: f64) -> String {
        let mut out = String::new();
        let payload: Vec<String> = self.task.payload.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(
            out,
            "# task {} {} {}",
            self.task.family,
            payload.join(" "),
            u8::from(self.task.is_noise)
        );
        let first = &self.trajectories[0];
        let mut header = vec!["traj".to_string(), "step".to_string()];
        header.extend(
            (0..first.observations.first().map_or(0, Vec::len)).map(|i| format!("obs_{i}")),
        );
        header.extend((0..first.actions.first().map_or(0, Vec::len)).map(|i| format!("act_{i}")));
        header.push("reward".into());
        header.push("return_to_go".into());
        let _ = writeln!(out, "{}", header.join(" "));
        for (k, traj) in self.trajectories.iter().enumerate() {
            let rtg = returns_to_go(traj, discount);
            for (t, g) in rtg.iter().enumerate() {
                let mut row = vec![k.to_string(), t.to_string()];
                row.extend(traj.observations[t].iter().map(|v| v.to_string()));
                row.extend(traj.actions[t].iter().map(|v| v.to_string()));
                row.push(traj.rewards[t].to_string());
                row.push(g.to_string());
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }
}

/// Samples `k` episodes of `task` under the policy. Episode `i` draws its
/// action noise from `stream.child(i)`.
pub fn rollout(
    policy: &GaussianPolicy,
    env: &EnvConfig,
    params: &ParamVector,
    task: &Task,
    k: usize,
    stream: Stream,
) -> Result<TrajectoryBatch> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "rollout count must be at least 1".into(),
        ));
    }
    policy.check_params(params)?;
    let values = params.values();
    let log_std = &values[policy.net.param_count()..];
    let std: Vec<f64> = log_std.iter().map(|ls| ls.exp()).collect();
    let mut trajectories = Vec::with_capacity(k);
    for i in 0..k {
        let mut rng = stream.child(i as u64).rng();
        let mut state = env_reset(task)?;
        let mut traj = Trajectory {
            observations: Vec::with_capacity(env.horizon),
            actions: Vec::with_capacity(env.horizon),
            rewards: Vec::with_capacity(env.horizon),
        };
        while !state.done {
            let cache = policy.net.forward_cached(values, &state.observation);
            let mean = cache.output();
            if let Some(m) = mean.iter().find(|m| !m.is_finite()) {
                return Err(Error::non_finite(
                    format!("policy mean at step {}", state.step_count),
                    *m,
                ));
            }
            let action: Vec<f64> = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect();
            let (next, reward) = env_step(env, task, &state, &action)?;
            traj.observations
                .push(std::mem::take(&mut state.observation));
            traj.actions.push(action);
            traj.rewards.push(reward);
            state = next;
        }
        trajectories.push(traj);
    }
    TrajectoryBatch::new(task.clone(), trajectories)
}

/// `R_t = Σ_{u≥t} discount^{u−t} r_u`.
pub fn returns_to_go(traj: &Trajectory, discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; traj.horizon()];
    let mut acc = 0.0;
    for t in (0..traj.horizon()).rev() {
        acc = traj.rewards[t] + discount * acc;
        out[t] = acc;
    }
    out
}

/// Returns-to-go minus the per-timestep batch mean.
fn advantages(batch: &TrajectoryBatch, discount: f64) -> Vec<Vec<f64>> {
    let rtg: Vec<Vec<f64>> = batch
        .trajectories
        .iter()
        .map(|t| returns_to_go(t, discount))
        .collect();
    let horizon = rtg[0].len();
    let n = rtg.len() as f64;
    let baseline: Vec<f64> = (0..horizon)
        .map(|t| rtg.iter().map(|r| r[t]).sum::<f64>() / n)
        .collect();
    rtg.into_iter()
        .map(|r| r.iter().zip(&baseline).map(|(r, b)| r - b).collect())
        .collect()
}

fn observation_as<S: Scalar>(obs: &[f64]) -> Vec<S> {
    obs.iter().map(|&v| S::constant(v)).collect()
}

/// REINFORCE loss with a per-timestep mean baseline:
/// `−(1/N) Σ_traj Σ_t log π(a_t|s_t) (R_t − b_t)`.
///
/// The trajectories are treated as fixed data; minimizing the loss ascends
/// the expected return.
#[derive(Debug, Clone)]
pub struct ReinforceLoss<'a> {
    policy: &'a GaussianPolicy,
    batch: &'a TrajectoryBatch,
    advantages: Vec<Vec<f64>>,
}

impl<'a> ReinforceLoss<'a> {
    pub fn new(policy: &'a GaussianPolicy, batch: &'a TrajectoryBatch, discount: f64) -> Self {
        ReinforceLoss {
            policy,
            batch,
            advantages: advantages(batch, discount),
        }
    }

    pub fn advantages(&self) -> &[Vec<f64>] {
        &self.advantages
    }
}

impl Objective for ReinforceLoss<'_> {
    fn dim(&self) -> usize {
        self.policy.param_count()
    }

    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        let net_len = self.policy.net.param_count();
        let log_std = &params[net_len..];
        let scale = -1.0 / self.batch.len() as f64;
        let mut loss = S::zero();
        let mut grad = vec![S::zero(); params.len()];
        let mut d_log_std_total = vec![S::zero(); log_std.len()];
        for (traj, adv) in self.batch.trajectories.iter().zip(&self.advantages) {
            for (t, &a) in adv.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let w = scale * a;
                let cache = self
                    .policy
                    .net
                    .forward_cached(params, &observation_as::<S>(&traj.observations[t]));
                let (logp, d_mean, d_ls) =
                    self.policy
                        .log_prob_terms(cache.output(), log_std, &traj.actions[t]);
                if !logp.value().is_finite() {
                    return Err(Error::non_finite(
                        format!("log-prob at step {t}"),
                        logp.value(),
                    ));
                }
                loss += logp.scale(w);
                let d_out: Vec<S> = d_mean.iter().map(|d| d.scale(w)).collect();
                for (acc, d) in d_log_std_total.iter_mut().zip(&d_ls) {
                    *acc += d.scale(w);
                }
                self.policy.net.backward(params, &cache, &d_out, &mut grad);
            }
        }
        for (g, d) in grad[net_len..].iter_mut().zip(d_log_std_total) {
            *g += d;
        }
        Ok((loss, grad))
    }
}

/// Clipped importance-sampling surrogate for the outer update:
/// `−(1/N) Σ_traj Σ_t min(ρ_t A_t, clip(ρ_t, 1−ε, 1+ε) A_t)`, with
/// `ρ_t = π_θ(a_t|s_t) / π_behavior(a_t|s_t)`.
///
/// At `θ = behavior` its gradient equals the REINFORCE gradient of the
/// batch. Ties between the two branches resolve to the clipped one, so
/// `ε = 0` yields a zero gradient.
#[derive(Debug, Clone)]
pub struct SurrogateLoss<'a> {
    policy: &'a GaussianPolicy,
    batch: &'a TrajectoryBatch,
    advantages: Vec<Vec<f64>>,
    behavior_log_prob: Vec<Vec<f64>>,
    clip: f64,
}

impl<'a> SurrogateLoss<'a> {
    pub fn new(
        policy: &'a GaussianPolicy,
        behavior_params: &ParamVector,
        batch: &'a TrajectoryBatch,
        clip: f64,
        discount: f64,
    ) -> Result<Self> {
        if clip.is_nan() || clip < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "clip must be >= 0, got {clip}"
            )));
        }
        let behavior_log_prob = batch
            .trajectories
            .iter()
            .map(|traj| {
                traj.observations
                    .iter()
                    .zip(&traj.actions)
                    .map(|(o, a)| {
                        let lp = policy.log_prob(behavior_params, o, a)?;
                        if lp.is_finite() {
                            Ok(lp)
                        } else {
                            Err(Error::non_finite("behavior log-prob", lp))
                        }
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SurrogateLoss {
            policy,
            batch,
            advantages: advantages(batch, discount),
            behavior_log_prob,
            clip,
        })
    }
}

impl Objective for SurrogateLoss<'_> {
    fn dim(&self) -> usize {
        self.policy.param_count()
    }

    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        let net_len = self.policy.net.param_count();
        let log_std = &params[net_len..];
        let scale = -1.0 / self.batch.len() as f64;
        let (lo, hi) = (1.0 - self.clip, 1.0 + self.clip);
        let mut loss = S::zero();
        let mut grad = vec![S::zero(); params.len()];
        let mut d_log_std_total = vec![S::zero(); log_std.len()];
        for ((traj, adv), behavior) in self
            .batch
            .trajectories
            .iter()
            .zip(&self.advantages)
            .zip(&self.behavior_log_prob)
        {
            for t in 0..traj.horizon() {
                let a = adv[t];
                if a == 0.0 {
                    continue;
                }
                let cache = self
                    .policy
                    .net
                    .forward_cached(params, &observation_as::<S>(&traj.observations[t]));
                let (logp, d_mean, d_ls) =
                    self.policy
                        .log_prob_terms(cache.output(), log_std, &traj.actions[t]);
                let ratio = (logp - S::constant(behavior[t])).exp();
                let r = ratio.value();
                if !r.is_finite() {
                    return Err(Error::non_finite(
                        format!("importance ratio at step {t}"),
                        r,
                    ));
                }
                let clipped_ratio = r.clamp(lo, hi);
                let inside = lo < r && r < hi;
                if clipped_ratio * a <= r * a && !inside {
                    // clipped branch with a saturated ratio: no gradient
                    loss += S::constant(clipped_ratio * a * scale);
                    continue;
                }
                // d term / d logp = ratio · A
                let coef = ratio.scale(a * scale);
                loss += coef;
                let d_out: Vec<S> = d_mean.iter().map(|&d| d * coef).collect();
                for (acc, &d) in d_log_std_total.iter_mut().zip(&d_ls) {
                    *acc += d * coef;
                }
                self.policy.net.backward(params, &cache, &d_out, &mut grad);
            }
        }
        for (g, d) in grad[net_len..].iter_mut().zip(d_log_std_total) {
            *g += d;
        }
        Ok((loss, grad))
    }
}
