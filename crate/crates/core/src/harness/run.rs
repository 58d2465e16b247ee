use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::spec::{Engine, EnvKind, ExperimentSpec};
use crate::error::{Error, Result};
use crate::meta::{
    evaluate_protocol, maml_iteration, rmaml_iteration, BufferRow, EvalResult, IterationRecord,
    MetaState,
};
use crate::ptb::Strategy;
use crate::rng::Stream;
use crate::sandbox::{run_strategy_comparison, Comparison};

pub const METRICS_HEADER: &str =
    "iteration,phase,step,mean_return,l,alpha_min,alpha_mean,alpha_max,seed,wall_ms";

/// Contents of `eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub name: String,
    pub engine: String,
    pub env: String,
    pub seed: u64,
    pub iterations: usize,
    pub step0: f64,
    pub step1: f64,
    pub step0_se: f64,
    pub step1_se: f64,
    pub gap_se: f64,
    pub n_tasks: usize,
    pub n_rollouts: usize,
    pub alpha_min: f64,
    pub alpha_mean: f64,
    pub alpha_max: f64,
}

/// What a finished policy-training run leaves behind.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub summary: EvalSummary,
    pub history: Vec<IterationRecord>,
    pub eval: EvalResult,
}

/// Per-strategy statistics of a sandbox study (`sandbox.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub median_final_distance: f64,
    pub mean_final_distance: f64,
    pub captured: usize,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxSummary {
    pub name: String,
    pub main_mean: [f64; 2],
    pub strategies: Vec<StrategySummary>,
    /// Seeds where MEDIUM ends strictly closer to the main mode than
    /// UNIFORM, when both strategies were run.
    pub medium_beats_uniform: Option<usize>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl SandboxSummary {
    pub fn from_comparison(name: &str, comparison: &Comparison, strategies: &[Strategy]) -> Self {
        let summaries = strategies
            .iter()
            .map(|&strategy| {
                let d = comparison.final_distances(strategy);
                StrategySummary {
                    strategy,
                    median_final_distance: median(&d),
                    mean_final_distance: d.iter().sum::<f64>() / d.len() as f64,
                    captured: comparison
                        .trials_for(strategy)
                        .filter(|t| t.captured)
                        .count(),
                    seeds: d.len(),
                }
            })
            .collect();
        let medium_beats_uniform =
            if strategies.contains(&Strategy::Medium) && strategies.contains(&Strategy::Uniform) {
                let medium = comparison.final_distances(Strategy::Medium);
                let uniform = comparison.final_distances(Strategy::Uniform);
                Some(medium.iter().zip(&uniform).filter(|(m, u)| m < u).count())
            } else {
                None
            };
        SandboxSummary {
            name: name.to_string(),
            main_mean: comparison.main_mean,
            strategies: summaries,
            medium_beats_uniform,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn metrics_row(
    out: &mut String,
    iteration: usize,
    phase: &str,
    step: u8,
    mean_return: f64,
    record: (usize, f64, f64, f64),
    seed: u64,
    wall_ms: f64,
) {
    let (l, lo, mean, hi) = record;
    writeln!(
        out,
        "{iteration},{phase},{step},{mean_return},{l},{lo},{mean},{hi},{seed},{wall_ms}"
    )
    .expect("writing to a String");
}

fn buffer_rows(out: &mut String, iteration: usize, rows: &[BufferRow]) {
    for row in rows {
        let payload: Vec<String> = row.task.payload.iter().map(|v| v.to_string()).collect();
        writeln!(
            out,
            "{iteration},{},{},{},{},{}",
            row.task.family.name(),
            payload.join(" "),
            u8::from(row.task.is_noise),
            row.val_return,
            u8::from(row.selected)
        )
        .expect("writing to a String");
    }
}

/// Trains one policy as described by `spec` and writes `config.toml`,
/// `metrics.csv` and `eval.json` (plus `buffer.csv` when requested) into
/// `spec.output_dir`.
///
/// A numeric abort writes `snapshot.json` before returning
/// [`Error::NumericAbort`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunArtifacts> {
    spec.validate()?;
    if spec.env == EnvKind::Sandbox {
        return Err(Error::config(
            "env",
            "sandbox experiments run through `run_sandbox`",
        ));
    }
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), spec.to_toml())?;

    let problem = spec.problem()?;
    let config = &spec.meta;
    let seed = config.seed;
    let mut state = MetaState::init(&problem, config, spec.policy.log_std_init)?;
    let mut metrics = String::from(METRICS_HEADER);
    metrics.push('\n');
    let mut buffer = String::from("iteration,family,payload,is_noise,val_return,selected\n");

    for _ in 0..config.iterations {
        let step = match spec.engine {
            Engine::Maml => maml_iteration(&problem, config, &mut state),
            Engine::Rmaml => rmaml_iteration(&problem, config, &mut state),
        };
        let record = match step {
            Ok(r) => r,
            Err(Error::NumericAbort(snapshot)) => {
                fs::write(
                    dir.join("snapshot.json"),
                    serde_json::to_string_pretty(&snapshot)?,
                )?;
                fs::write(dir.join("metrics.csv"), &metrics)?;
                return Err(Error::NumericAbort(snapshot));
            }
            Err(e) => return Err(e),
        };
        log::info!(
            "{} iteration {}: train {:.3} val {:.3} l {} alpha {:.4}",
            spec.name,
            record.iteration,
            record.train_return,
            record.val_return,
            record.l,
            record.alpha_mean
        );
        let wall_ms = if spec.record_wall_time {
            record.wall_ms
        } else {
            0.0
        };
        let stats = (
            record.l,
            record.alpha_min,
            record.alpha_mean,
            record.alpha_max,
        );
        for (step, value) in [(0, record.train_return), (1, record.val_return)] {
            metrics_row(
                &mut metrics,
                record.iteration,
                "train",
                step,
                value,
                stats,
                seed,
                wall_ms,
            );
        }
        if spec.dump_buffer && spec.engine == Engine::Rmaml {
            buffer_rows(&mut buffer, record.iteration, &state.last_buffer);
        }
    }

    let eval = evaluate_protocol(
        &problem,
        &state.theta,
        &state.alpha,
        &problem.source.nominal(),
        &spec.eval,
        config.discount,
        Stream::root(seed).named("eval"),
        config.parallel,
    )?;
    let stats = (0, state.alpha.min(), state.alpha.mean(), state.alpha.max());
    for (step, value) in [(0, eval.step0), (1, eval.step1)] {
        metrics_row(
            &mut metrics,
            config.iterations,
            "test",
            step,
            value,
            stats,
            seed,
            0.0,
        );
    }
    let summary = EvalSummary {
        name: spec.name.clone(),
        engine: spec.engine.name().into(),
        env: spec.env.name().into(),
        seed,
        iterations: config.iterations,
        step0: eval.step0,
        step1: eval.step1,
        step0_se: eval.step0_se,
        step1_se: eval.step1_se,
        gap_se: eval.gap_se,
        n_tasks: eval.n_tasks,
        n_rollouts: eval.n_rollouts,
        alpha_min: state.alpha.min(),
        alpha_mean: state.alpha.mean(),
        alpha_max: state.alpha.max(),
    };
    fs::write(dir.join("metrics.csv"), &metrics)?;
    fs::write(
        dir.join("eval.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    if spec.dump_buffer && spec.engine == Engine::Rmaml {
        fs::write(dir.join("buffer.csv"), &buffer)?;
    }
    Ok(RunArtifacts {
        output_dir: dir.clone(),
        summary,
        history: state.history,
        eval,
    })
}

/// Runs `spec` once per seed into `<output_dir>/seed_<n>`.
pub fn run_seeds(spec: &ExperimentSpec, seeds: &[u64]) -> Result<Vec<RunArtifacts>> {
    seeds
        .iter()
        .map(|&seed| {
            run_experiment(&with_seed(
                spec,
                seed,
                &spec.output_dir.join(format!("seed_{seed}")),
            ))
        })
        .collect()
}

/// Copy of `spec` with a different seed and output directory.
pub fn with_seed(spec: &ExperimentSpec, seed: u64, output_dir: &Path) -> ExperimentSpec {
    let mut spec = spec.clone();
    spec.meta.seed = seed;
    spec.output_dir = output_dir.to_path_buf();
    spec
}

/// Runs the strategy study of a `sandbox` spec and writes `config.toml`,
/// `trace.csv` and `sandbox.json`.
pub fn run_sandbox(spec: &ExperimentSpec) -> Result<SandboxSummary> {
    if spec.env != EnvKind::Sandbox {
        return Err(Error::config(
            "env",
            format!("expected `sandbox`, got `{}`", spec.env.name()),
        ));
    }
    spec.validate()?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), spec.to_toml())?;
    let comparison = run_strategy_comparison(&spec.sandbox)?;
    fs::write(dir.join("trace.csv"), comparison.trace_csv())?;
    let summary =
        SandboxSummary::from_comparison(&spec.name, &comparison, &spec.sandbox.strategies);
    fs::write(
        dir.join("sandbox.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
