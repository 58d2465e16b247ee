//! Loads, validates and round-trips experiment configs, then runs the
//! small smoke experiment and lists what it wrote.

use rmaml::harness::{run_experiment, ExperimentSpec};

fn main() -> rmaml::Result<()> {
    let spec = ExperimentSpec::from_toml_str(include_str!("configs/smoke.toml"))?;
    println!(
        "{} ({} on {}), effective config:\n{}",
        spec.name,
        spec.engine.name(),
        spec.env.name(),
        spec.to_toml()
    );

    for bad in [
        "name = \"x\"\nenv = \"nav2d\"\n[meta]\nbeta = -1.0\n",
        "name = \"x\"\nenv = \"nav2d\"\n[meta]\nbata = 0.1\n",
        "name = \"x\"\nenv = \"point_vel_noisy\"\n",
        "name = \"x\"\nenv = [\n",
    ] {
        match ExperimentSpec::from_toml_str(bad) {
            Ok(_) => println!("unexpectedly accepted:\n{bad}"),
            Err(e) => println!("rejected: {e}"),
        }
    }

    let dir = std::env::temp_dir().join("rmaml_experiment_config");
    let spec = ExperimentSpec {
        output_dir: dir.clone(),
        ..spec
    };
    let run = run_experiment(&spec)?;
    println!(
        "\nsmoke run: step0 {:.3}, step1 {:.3}",
        run.eval.step0, run.eval.step1
    );
    let mut files: Vec<String> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    files.sort();
    println!("{} contains {}", dir.display(), files.join(", "));
    Ok(())
}
