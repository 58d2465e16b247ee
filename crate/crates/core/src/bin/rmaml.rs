use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmaml::harness::{compare_runs, run_experiment, run_sandbox, selftest, ExperimentSpec};
use rmaml::Error;

#[derive(Parser)]
#[command(
    name = "rmaml",
    version,
    about = "MAML / Robust MAML experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate one experiment.
    Run {
        config: PathBuf,
        /// Override `meta.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Override `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare evaluated runs (each directory is one run or a folder of seeds).
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "step1")]
        metric: String,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the 2D reaching strategy study.
    Sandbox {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check gradients and hypergradients against finite differences.
    Selftest {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Parse { .. } => 2,
        Error::NumericAbort(_) => 3,
        _ => 1,
    }
}

fn load(config: &Path, out: Option<PathBuf>) -> Result<ExperimentSpec, Error> {
    let mut spec = ExperimentSpec::load(config)?;
    if let Some(out) = out {
        spec.output_dir = out;
    }
    Ok(spec)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => load(&config, out).and_then(|mut spec| {
            if let Some(seed) = seed {
                spec.meta.seed = seed;
            }
            let dir = spec.output_dir.clone();
            match run_experiment(&spec) {
                Ok(run) => {
                    println!(
                        "{}: step0 {:.4} step1 {:.4} ({} tasks x {} rollouts) -> {}",
                        spec.name,
                        run.summary.step0,
                        run.summary.step1,
                        run.summary.n_tasks,
                        run.summary.n_rollouts,
                        dir.display()
                    );
                    Ok(())
                }
                Err(e @ Error::NumericAbort(_)) => {
                    eprintln!(
                        "snapshot written to {}",
                        dir.join("snapshot.json").display()
                    );
                    Err(e)
                }
                Err(e) => Err(e),
            }
        }),
        Command::Compare { dirs, metric, json } => compare_runs(&dirs, &metric).map(|report| {
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                print!("{report}");
            }
        }),
        Command::Sandbox { config, out } => load(&config, out)
            .and_then(|spec| run_sandbox(&spec).map(|s| (s, spec.output_dir)))
            .map(|(summary, dir)| {
                for s in &summary.strategies {
                    println!(
                        "{:<8} median final distance {:.4}, captured {}/{}",
                        s.strategy.name(),
                        s.median_final_distance,
                        s.captured,
                        s.seeds
                    );
                }
                if let Some(wins) = summary.medium_beats_uniform {
                    println!("medium beats uniform in {wins} seed(s)");
                }
                println!("trace -> {}", dir.join("trace.csv").display());
            }),
        Command::Selftest { instances, seed } => match selftest(instances, seed) {
            Ok(report) => {
                print!("{report}");
                if report.passed() {
                    Ok(())
                } else {
                    return ExitCode::FAILURE;
                }
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
