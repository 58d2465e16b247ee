use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::Activation;
use crate::envs::{EnvConfig, NoiseSpec, TaskFamily, TaskSource};
use crate::error::{Error, Result};
use crate::meta::{EvalConfig, MetaConfig, MetaProblem};
use crate::policy::GaussianPolicy;
use crate::sandbox::SandboxConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Maml,
    Rmaml,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Maml => "maml",
            Engine::Rmaml => "rmaml",
        }
    }
}

/// Which environment an experiment trains on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    #[default]
    Nav2d,
    PointVel,
    /// Velocity targets with injected out-of-range tasks at training time
    /// only; evaluation uses the nominal distribution.
    PointVelNoisy,
    /// The geometric strategy study; `[meta]`, `[policy]` and `[eval]` are
    /// ignored.
    Sandbox,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Nav2d => "nav2d",
            EnvKind::PointVel => "point_vel",
            EnvKind::PointVelNoisy => "point_vel_noisy",
            EnvKind::Sandbox => "sandbox",
        }
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nav2d" => Ok(EnvKind::Nav2d),
            "point_vel" => Ok(EnvKind::PointVel),
            "point_vel_noisy" => Ok(EnvKind::PointVelNoisy),
            "sandbox" => Ok(EnvKind::Sandbox),
            other => Err(Error::config(
                "env",
                format!("unknown environment `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden_sizes: Vec<usize>,
    pub activation: Activation,
    pub log_std_init: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            hidden_sizes: vec![32, 32],
            activation: Activation::Tanh,
            log_std_init: 0.0,
        }
    }
}

/// A complete, self-describing experiment.
///
/// Written back next to the results as `config.toml`, so every run can be
/// repeated from its output directory alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub engine: Engine,
    pub env: EnvKind,
    pub output_dir: PathBuf,
    /// Fill the `wall_ms` column; off by default so reruns are byte-identical.
    pub record_wall_time: bool,
    /// Write `buffer.csv` with the task buffer of every RMAML iteration.
    pub dump_buffer: bool,
    pub meta: MetaConfig,
    pub policy: PolicyConfig,
    pub environment: EnvConfig,
    /// Required for (and only allowed with) `point_vel_noisy`.
    pub noise: Option<NoiseSpec>,
    pub eval: EvalConfig,
    pub sandbox: SandboxConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            engine: Engine::Maml,
            env: EnvKind::Nav2d,
            output_dir: PathBuf::from("runs/experiment"),
            record_wall_time: false,
            dump_buffer: false,
            meta: MetaConfig::default(),
            policy: PolicyConfig::default(),
            environment: EnvConfig::default(),
            noise: None,
            eval: EvalConfig::default(),
            sandbox: SandboxConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parses and validates a TOML experiment description.
    ///
    /// Errors name the offending key, e.g. `meta.beta`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
            line: e
                .span()
                .map(|span| text[..span.start].lines().count().max(1))
                .unwrap_or(0),
            message: e.message().to_string(),
        })?;
        let spec: ExperimentSpec = serde_path_to_error::deserialize(toml::Value::Table(table))
            .map_err(|e| {
                let field = e.path().to_string();
                let inner = e.into_inner();
                Error::config(field, inner.message().trim_end())
            })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        match (self.env, &self.noise) {
            (EnvKind::PointVelNoisy, None) => {
                return Err(Error::config(
                    "noise",
                    "point_vel_noisy needs a [noise] section",
                ))
            }
            (EnvKind::PointVelNoisy, Some(noise)) => noise.validate()?,
            (env, Some(_)) => {
                return Err(Error::config(
                    "noise",
                    format!(
                        "only point_vel_noisy takes a [noise] section, env is {}",
                        env.name()
                    ),
                ))
            }
            (_, None) => {}
        }
        if self.env == EnvKind::Sandbox {
            return self
                .sandbox
                .validate()
                .map_err(|e| prefix_field(e, "sandbox"));
        }
        self.meta.validate()?;
        self.environment.validate()?;
        if self.policy.hidden_sizes.contains(&0) {
            return Err(Error::config(
                "policy.hidden_sizes",
                "layer sizes must be positive",
            ));
        }
        if !self.policy.log_std_init.is_finite() {
            return Err(Error::config("policy.log_std_init", "must be finite"));
        }
        if self.eval.n_tasks == 0 {
            return Err(Error::config("eval.n_tasks", "must be positive"));
        }
        if self.eval.n_rollouts == 0 {
            return Err(Error::config("eval.n_rollouts", "must be positive"));
        }
        Ok(())
    }

    /// Task distribution used for training.
    pub fn train_source(&self) -> Result<TaskSource> {
        match self.env {
            EnvKind::Nav2d => Ok(TaskSource::Nominal(TaskFamily::Nav2d)),
            EnvKind::PointVel => Ok(TaskSource::Nominal(TaskFamily::PointVel)),
            EnvKind::PointVelNoisy => Ok(TaskSource::Noisy(
                TaskFamily::PointVel,
                self.noise.unwrap_or_default(),
            )),
            EnvKind::Sandbox => Err(Error::UnsupportedFamily {
                family: "sandbox".into(),
                operation: "policy training",
            }),
        }
    }

    pub fn problem(&self) -> Result<MetaProblem> {
        let source = self.train_source()?;
        let family = source.family();
        let policy = GaussianPolicy::new(
            family.obs_dim(),
            family.action_dim(),
            self.policy.hidden_sizes.clone(),
            self.policy.activation,
        )?;
        Ok(MetaProblem {
            policy,
            env: self.environment,
            source,
        })
    }
}

fn prefix_field(err: Error, section: &str) -> Error {
    match err {
        Error::Config { field, message } => Error::Config {
            field: format!("{section}.{field}"),
            message,
        },
        other => other,
    }
}
