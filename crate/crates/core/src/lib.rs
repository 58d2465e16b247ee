//! A desk-scale meta-reinforcement-learning lab.
//!
//! MAML learns a policy initialization that adapts to a new task with one
//! gradient step. RMAML extends it with a learner learning rate tuned online
//! by its hypergradient and a prioritization task buffer that re-serves
//! medium-difficulty tasks to counter noisy training distributions.
//!
//! * [`diffcore`]: MLPs, gradients, Hessian-vector products, meta-gradients
//! * [`envs`]: point-mass task families and the noise-task wrapper
//! * [`policy`]: Gaussian policy, rollouts, REINFORCE and surrogate losses
//! * [`ptb`]: the prioritization task buffer and its L schedule
//! * [`meta`]: MAML / RMAML iterations and the evaluation protocol
//! * [`sandbox`]: the geometric 2D reaching strategy study
//! * [`harness`]: configs, experiment runs, comparisons, the oracle self-test

pub mod diffcore;
pub mod envs;
mod error;
pub mod harness;
pub mod meta;
pub mod policy;
pub mod ptb;
pub mod rng;
pub mod sandbox;

pub use error::{Error, Result, Snapshot};
