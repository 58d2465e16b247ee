//! Rolls out an untrained Gaussian policy on the point-mass task families
//! and prints the trajectory text format.

use rmaml::diffcore::Activation;
use rmaml::envs::{
    sample_tasks, sample_tasks_noisy, tasks_from_text, tasks_to_text, EnvConfig, NoiseSpec,
    TaskFamily,
};
use rmaml::policy::{rollout, GaussianPolicy};
use rmaml::rng::Stream;

fn main() -> rmaml::Result<()> {
    let env = EnvConfig {
        horizon: 5,
        ..EnvConfig::default()
    };
    let root = Stream::root(11);

    for family in [TaskFamily::Nav2d, TaskFamily::PointVel] {
        let policy = GaussianPolicy::new(
            family.obs_dim(),
            family.action_dim(),
            vec![16],
            Activation::Tanh,
        )?;
        let theta = policy.init_params(0.0, root.named("init"));
        let tasks = sample_tasks(family, 3, &mut root.named("tasks").rng())?;
        print!("{family} tasks:\n{}", tasks_to_text(&tasks));
        let batch = rollout(&policy, &env, &theta, &tasks[0], 2, root.named("rollout"))?;
        println!("mean return on the first task: {:.3}", batch.mean_return());
        print!("{}", batch.to_columnar_text(0.99));
        println!();
    }

    let noise = NoiseSpec {
        fraction: 0.2,
        low: 3.0,
        high: 4.0,
    };
    let tasks = sample_tasks_noisy(
        TaskFamily::PointVel,
        1000,
        &noise,
        &mut root.named("noisy").rng(),
    )?;
    let noisy = tasks.iter().filter(|t| t.is_noise).count();
    println!("noisy point_vel: {noisy} of 1000 tasks are noise (target speeds in [3, 4])");
    let parsed = tasks_from_text(&tasks_to_text(&tasks))?;
    println!("text round trip preserved all tasks: {}", parsed == tasks);
    Ok(())
}
