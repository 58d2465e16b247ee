//! The 2D reaching study: a point agent trained on a task mixture with
//! one main cluster and two noise clusters, under each buffer strategy.
//!
//! ```text
//! cargo run --release --example reaching_sandbox -- [seeds]
//! ```

use rmaml::harness::{median, ExperimentSpec};
use rmaml::sandbox::run_strategy_comparison;

fn main() -> rmaml::Result<()> {
    let spec = ExperimentSpec::from_toml_str(include_str!("configs/reaching_sandbox.toml"))?;
    let mut config = spec.sandbox.clone();
    if let Some(n) = std::env::args().nth(1) {
        config.seeds = (0..n.parse::<u64>().expect("seed count")).collect();
    }
    let comparison = run_strategy_comparison(&config)?;
    let main = config.mixture.main_mean();
    println!(
        "main cluster at ({}, {}), agent starts at ({}, {}), {} seeds",
        main[0],
        main[1],
        config.agent_start[0],
        config.agent_start[1],
        config.seeds.len()
    );
    for strategy in &config.strategies {
        let distances = comparison.final_distances(*strategy);
        let worst = distances.iter().cloned().fold(0.0, f64::max);
        let captured = comparison
            .trials_for(*strategy)
            .filter(|t| t.captured)
            .count();
        println!(
            "{strategy:<8} median distance to the main mean {:.3} (worst {worst:.3}), captured {captured}/{}",
            median(&distances),
            distances.len()
        );
    }
    Ok(())
}
