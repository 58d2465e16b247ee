use serde::{Deserialize, Serialize};

use super::alpha::Granularity;
use crate::diffcore::GradMode;
use crate::error::{Error, Result};
use crate::ptb::{LSchedule, Strategy};

/// Hyperparameters of the MAML / RMAML engines.
///
/// `alpha0` is the step size of the learner-rate update; `beta` is the outer
/// step size and defaults to the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaConfig {
    /// Tasks per outer update (M).
    pub meta_batch_size: usize,
    /// Trajectories per task for the train and validation batches (K).
    pub k_trajectories: usize,
    /// Initial learner learning rate α.
    pub alpha_init: f64,
    /// Step size of the α update (α₀).
    pub alpha0: f64,
    /// Outer learning rate (β).
    pub beta: f64,
    /// Rescales the summed meta-gradient to at most this norm before the
    /// outer step. `None` leaves it untouched.
    pub max_grad_norm: Option<f64>,
    pub alpha_granularity: Granularity,
    pub alpha_floor: f64,
    /// Largest relative change of any α component in one update.
    /// `None` applies the raw hypergradient step.
    pub alpha_max_step: Option<f64>,
    /// Whether RMAML adapts α. MAML never does.
    pub alpha_update: bool,
    pub grad_mode: GradMode,
    pub strategy: Strategy,
    /// Largest number of buffer-served tasks; defaults to M/4.
    pub max_l: Option<usize>,
    pub iterations: usize,
    pub seed: u64,
    /// Surrogate clip ε.
    pub clip: f64,
    pub discount: f64,
    /// Run per-task work on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            meta_batch_size: 20,
            k_trajectories: 10,
            alpha_init: 0.03,
            alpha0: 0.01,
            beta: 0.01,
            max_grad_norm: None,
            alpha_granularity: Granularity::Scalar,
            alpha_floor: 1e-4,
            alpha_max_step: None,
            alpha_update: true,
            grad_mode: GradMode::ExactSecondOrder,
            strategy: Strategy::Medium,
            max_l: None,
            iterations: 300,
            seed: 0,
            clip: 0.2,
            discount: 0.99,
            parallel: true,
        }
    }
}

impl MetaConfig {
    pub fn max_l(&self) -> usize {
        self.max_l.unwrap_or(self.meta_batch_size / 4)
    }

    pub fn schedule(&self) -> LSchedule {
        LSchedule {
            max_l: self.max_l(),
            total_iterations: self.iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &str, v: usize| {
            if v == 0 {
                Err(Error::config(field, "must be positive"))
            } else {
                Ok(())
            }
        };
        positive("meta.meta_batch_size", self.meta_batch_size)?;
        positive("meta.k_trajectories", self.k_trajectories)?;
        positive("meta.iterations", self.iterations)?;
        for (field, v) in [("meta.alpha0", self.alpha0), ("meta.beta", self.beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        if let Some(limit) = self.max_grad_norm {
            if !(limit > 0.0 && limit.is_finite()) {
                return Err(Error::config(
                    "meta.max_grad_norm",
                    format!("must be positive, got {limit}"),
                ));
            }
        }
        if let Some(step) = self.alpha_max_step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(Error::config(
                    "meta.alpha_max_step",
                    format!("must be positive, got {step}"),
                ));
            }
        }
        if !(self.alpha_floor >= 0.0 && self.alpha_floor.is_finite()) {
            return Err(Error::config("meta.alpha_floor", "must be finite and >= 0"));
        }
        if !(self.alpha_init >= self.alpha_floor && self.alpha_init.is_finite()) {
            return Err(Error::config(
                "meta.alpha_init",
                format!("must be finite and >= alpha_floor ({})", self.alpha_floor),
            ));
        }
        if self.max_l() > self.meta_batch_size {
            return Err(Error::config(
                "meta.max_l",
                format!(
                    "{} exceeds meta_batch_size {}",
                    self.max_l(),
                    self.meta_batch_size
                ),
            ));
        }
        if !(self.clip >= 0.0 && self.clip.is_finite()) {
            return Err(Error::config("meta.clip", "must be finite and >= 0"));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::config("meta.discount", "must lie in (0, 1]"));
        }
        Ok(())
    }
}
