//! MAML and RMAML training engines, the learner-rate hypergradient, and the
//! step-0 / step-1 evaluation protocol.

mod alpha;
mod config;
mod engine;
mod eval;
mod hyper;

pub use alpha::{AlphaParams, Granularity};
pub use config::MetaConfig;
pub use engine::{
    maml_iteration, rmaml_iteration, BufferRow, IterationRecord, MetaProblem, MetaState,
};
pub use eval::{evaluate_protocol, EvalConfig, EvalResult};
pub use hyper::{alpha_hypergradient, alpha_update, limit_hypergradient};
