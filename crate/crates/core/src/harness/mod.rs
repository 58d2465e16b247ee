//! Experiment runner: TOML experiment specs, seeded training runs with CSV
//! metrics and JSON summaries, paired comparisons, and the gradient oracle
//! self-test.

mod compare;
mod run;
mod selftest;
mod spec;

pub use compare::{
    binomial_upper_tail, compare_runs, load_group, ComparisonReport, GroupStats, PairTest,
    RunRecord,
};
pub use run::{
    median, run_experiment, run_sandbox, run_seeds, with_seed, EvalSummary, RunArtifacts,
    SandboxSummary, StrategySummary, METRICS_HEADER,
};
pub use selftest::{selftest, CheckResult, SelftestReport, TOLERANCE};
pub use spec::{Engine, EnvKind, ExperimentSpec, PolicyConfig};
