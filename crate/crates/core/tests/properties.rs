use proptest::prelude::*;
use rmaml::diffcore::{grad, inner_adapt, Activation, ParamVector};
use rmaml::envs::{sample_tasks, EnvConfig, Task, TaskFamily};
use rmaml::meta::{alpha_update, AlphaParams, Granularity};
use rmaml::policy::{rollout, GaussianPolicy, ReinforceLoss, TrajectoryBatch};
use rmaml::ptb::{l_at, LSchedule, PtbEntry, Strategy, TaskBuffer};
use rmaml::rng::Stream;
use rmaml::sandbox::{perfect_maml_step, priority_score, AgentState};

fn buffer_of(returns: &[f64]) -> TaskBuffer {
    let mut buffer = TaskBuffer::new();
    buffer
        .store(
            returns
                .iter()
                .enumerate()
                .map(|(i, &r)| PtbEntry {
                    task: Task::new(TaskFamily::PointVel, vec![i as f64], false).unwrap(),
                    val_return: r,
                })
                .collect(),
        )
        .unwrap();
    buffer
}

fn layered(values: Vec<f64>) -> ParamVector {
    let policy = GaussianPolicy::new(2, 2, vec![3], Activation::Tanh).unwrap();
    let n = policy.param_count();
    policy
        .params_from(values.into_iter().cycle().take(n).collect())
        .unwrap()
}

proptest! {
    #[test]
    fn scalar_alpha_matches_filled_per_parameter(
        theta in prop::collection::vec(-3.0f64..3.0, 1..40),
        grads in prop::collection::vec(-50.0f64..50.0, 40),
        a in 1e-4f64..2.0,
    ) {
        let theta = layered(theta);
        let g = theta.with_values(grads.into_iter().cycle().take(theta.len()).collect());
        let scalar = inner_adapt(&theta, &g, &AlphaParams::scalar(a)).unwrap();
        for granularity in [Granularity::PerLayer, Granularity::PerParameter] {
            let filled = AlphaParams::filled(granularity, a, &theta, 0.0).unwrap();
            let other = inner_adapt(&theta, &g, &filled).unwrap();
            let same = scalar.values().iter().zip(other.values()).all(|(x, y)| x.to_bits() == y.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn selections_are_buffer_members(
        returns in prop::collection::vec(-100.0f64..0.0, 1..30),
        frac in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        let buffer = buffer_of(&returns);
        let n = returns.len();
        let l = ((n as f64) * frac).round() as usize;
        let mut rng = Stream::root(seed).rng();
        for strategy in Strategy::ALL {
            let picked = buffer.select_indices(l, strategy, &mut rng).unwrap();
            prop_assert_eq!(picked.len(), l);
            let mut sorted = picked.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), l);
            prop_assert!(picked.iter().all(|&i| i < n));
        }
        let mut all = buffer.select_indices(n, Strategy::Medium, &mut rng).unwrap();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn easy_and_hard_are_disjoint_up_to_half(
        returns in prop::collection::vec(prop::sample::select(vec![-3.0, -2.0, -1.0, 0.0]), 2..30),
        seed in any::<u64>(),
    ) {
        let buffer = buffer_of(&returns);
        let mut rng = Stream::root(seed).rng();
        for l in 0..=returns.len() / 2 {
            let easy = buffer.select_indices(l, Strategy::Easy, &mut rng).unwrap();
            let hard = buffer.select_indices(l, Strategy::Hard, &mut rng).unwrap();
            prop_assert!(easy.iter().all(|i| !hard.contains(i)));
            if l > 0 {
                let worst_easy = easy.iter().map(|&i| returns[i]).fold(f64::INFINITY, f64::min);
                let best_hard = hard.iter().map(|&i| returns[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(worst_easy >= best_hard);
            }
        }
    }

    #[test]
    fn schedule_is_monotone_and_bounded(max_l in 0usize..50, total in 1usize..500) {
        let schedule = LSchedule { max_l, total_iterations: total };
        let mut previous = 0;
        for it in 0..total + 3 {
            let l = l_at(&schedule, it);
            prop_assert!(l >= previous && l <= max_l);
            previous = l;
        }
        prop_assert_eq!(l_at(&schedule, 0), 0);
        if total > 1 {
            prop_assert_eq!(l_at(&schedule, total - 1), max_l);
        }
    }

    #[test]
    fn maml_step_contracts_exactly(
        p in prop::array::uniform2(-10.0f64..10.0),
        t in prop::array::uniform2(-10.0f64..10.0),
        rate in 0.0f64..=1.0,
    ) {
        let task = Task::new(TaskFamily::Sandbox, t.to_vec(), false).unwrap();
        let agent = AgentState { position: p, iteration: 0 };
        let before = priority_score(&agent, &task);
        let after = priority_score(&perfect_maml_step(&agent, &task, rate), &task);
        prop_assert!((after - (1.0 - rate) * before).abs() <= 1e-12 * (1.0 + before));
    }

    #[test]
    fn alpha_never_drops_below_floor(
        start in prop::collection::vec(1e-2f64..1.0, 3),
        steps in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 1..20),
        floor in 1e-6f64..1e-2,
    ) {
        let mut alpha = AlphaParams::new(Granularity::PerLayer, start, floor).unwrap();
        for h in &steps {
            alpha = alpha_update(&alpha, h, 0.01).unwrap();
            prop_assert!(alpha.values().iter().all(|&a| a >= floor && a.is_finite()));
        }
    }
}

fn shifted(batch: &TrajectoryBatch, c: f64) -> TrajectoryBatch {
    let mut out = batch.clone();
    for traj in &mut out.trajectories {
        for r in &mut traj.rewards {
            *r += c;
        }
    }
    out
}

#[test]
fn constant_reward_shift_leaves_gradient_within_noise() {
    let env = EnvConfig::default();
    let policy = GaussianPolicy::new(2, 2, vec![8], Activation::Tanh).unwrap();
    let theta = policy.init_params(0.0, Stream::root(1).named("init"));
    let task = sample_tasks(TaskFamily::Nav2d, 1, &mut Stream::root(1).rng())
        .unwrap()
        .remove(0);
    let discount = 0.99;

    let mut grads = Vec::new();
    let mut shifts = Vec::new();
    for seed in 0..50 {
        let batch = rollout(
            &policy,
            &env,
            &theta,
            &task,
            10,
            Stream::root(seed).named("rollout"),
        )
        .unwrap();
        let g = grad(&ReinforceLoss::new(&policy, &batch, discount), &theta).unwrap();
        let moved = shifted(&batch, 5.0);
        assert_ne!(moved.mean_return(), batch.mean_return());
        let g_moved = grad(&ReinforceLoss::new(&policy, &moved, discount), &theta).unwrap();
        shifts.push(
            g_moved
                .values()
                .iter()
                .zip(g.values())
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        grads.push(g.into_values());
    }

    let n = grads.len() as f64;
    for j in 0..theta.len() {
        let mean = grads.iter().map(|g| g[j]).sum::<f64>() / n;
        let sd = (grads.iter().map(|g| (g[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mean_shift = shifts.iter().map(|s| s[j]).sum::<f64>() / n;
        assert!(
            mean_shift.abs() <= 3.0 * sd / n.sqrt() + 1e-9,
            "component {j}: shift {mean_shift} vs band {}",
            3.0 * sd / n.sqrt()
        );
    }
}
