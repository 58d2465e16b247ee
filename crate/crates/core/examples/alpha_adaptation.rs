//! RMAML on 2D navigation starting from a learner rate ten times too large.
//! The hypergradient pulls α back down while the policy trains.
//!
//! ```text
//! cargo run --release --example alpha_adaptation -- [iterations]
//! ```

use rmaml::harness::ExperimentSpec;
use rmaml::meta::{rmaml_iteration, MetaState};

fn main() -> rmaml::Result<()> {
    let mut spec =
        ExperimentSpec::from_toml_str(include_str!("configs/nav2d_rmaml_miscalibrated.toml"))?;
    if let Some(n) = std::env::args().nth(1) {
        spec.meta.iterations = n.parse().expect("iteration count");
    }
    let problem = spec.problem()?;
    let config = &spec.meta;
    let mut state = MetaState::init(&problem, config, spec.policy.log_std_init)?;

    println!("iteration  alpha    L  post-adaptation return");
    let report_every = (config.iterations / 15).max(1);
    while state.iteration < config.iterations {
        rmaml_iteration(&problem, config, &mut state)?;
        let rec = state.history.last().expect("one record per iteration");
        if rec.iteration % report_every == 0 || state.iteration == config.iterations {
            println!(
                "{:>9} {:>7.4} {:>3} {:>10.3}",
                rec.iteration, rec.alpha_mean, rec.l, rec.val_return
            );
        }
    }
    println!("alpha {} -> {:.4}", config.alpha_init, state.alpha.mean());
    Ok(())
}
