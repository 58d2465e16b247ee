//! MAML against RMAML on velocity tracking where a fifth of the training
//! tasks ask for an unreachable speed. Runs a few seeds of each through the
//! harness and compares the noise-free step-1 returns.
//!
//! ```text
//! cargo run --release --example noisy_velocity -- [seeds] [out_dir]
//! ```

use std::path::PathBuf;

use rmaml::harness::{compare_runs, run_seeds, ExperimentSpec};

fn main() -> rmaml::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: Vec<u64> = (0..args.next().map_or(3, |s| s.parse().expect("seed count"))).collect();
    let out = PathBuf::from(args.next().unwrap_or_else(|| "runs/noisy_velocity".into()));

    let mut dirs = Vec::new();
    for text in [
        include_str!("configs/noisy_vel_rmaml.toml"),
        include_str!("configs/noisy_vel_maml.toml"),
    ] {
        let mut spec = ExperimentSpec::from_toml_str(text)?;
        spec.output_dir = out.join(&spec.name);
        for run in run_seeds(&spec, &seeds)? {
            println!(
                "{} seed {}: step0 {:.3}, step1 {:.3}, final alpha {:.4}",
                spec.name,
                run.summary.seed,
                run.summary.step0,
                run.summary.step1,
                run.summary.alpha_mean
            );
        }
        dirs.push(spec.output_dir);
    }
    println!();
    print!("{}", compare_runs(&dirs, "step1")?);
    Ok(())
}
