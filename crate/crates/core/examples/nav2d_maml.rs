//! Trains MAML on 2D navigation with the engine API directly, then runs
//! the step-0 / step-1 evaluation on fresh goals.
//!
//! ```text
//! cargo run --release --example nav2d_maml -- [iterations]
//! ```

use rmaml::harness::ExperimentSpec;
use rmaml::meta::{evaluate_protocol, maml_iteration, MetaState};
use rmaml::rng::Stream;

fn main() -> rmaml::Result<()> {
    let mut spec = ExperimentSpec::from_toml_str(include_str!("configs/nav2d_maml.toml"))?;
    if let Some(n) = std::env::args().nth(1) {
        spec.meta.iterations = n.parse().expect("iteration count");
    }
    let problem = spec.problem()?;
    let config = &spec.meta;
    let mut state = MetaState::init(&problem, config, spec.policy.log_std_init)?;

    let report_every = (config.iterations / 10).max(1);
    while state.iteration < config.iterations {
        maml_iteration(&problem, config, &mut state)?;
        let rec = state.history.last().expect("one record per iteration");
        if rec.iteration % report_every == 0 || state.iteration == config.iterations {
            println!(
                "iteration {:>4}: pre-adaptation {:>8.3}, post-adaptation {:>8.3}",
                rec.iteration, rec.train_return, rec.val_return
            );
        }
    }

    let eval = evaluate_protocol(
        &problem,
        &state.theta,
        &state.alpha,
        &problem.source.nominal(),
        &spec.eval,
        config.discount,
        Stream::root(config.seed).named("eval"),
        config.parallel,
    )?;
    println!(
        "test goals: step 0 {:.3} ± {:.3}, step 1 {:.3} ± {:.3} ({} tasks x {} rollouts)",
        eval.step0, eval.step0_se, eval.step1, eval.step1_se, eval.n_tasks, eval.n_rollouts
    );
    Ok(())
}
