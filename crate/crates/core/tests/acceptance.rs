//! Acceptance criteria 1–8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.
//!
//! `cargo test --test acceptance -- 2 8` runs only the listed criteria.

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use rmaml::diffcore::gradcheck::{central_derivative, DEFAULT_STEP};
use rmaml::diffcore::objectives::Quadratic;
use rmaml::diffcore::{grad, inner_adapt, value, ParamVector};
use rmaml::envs::{Task, TaskFamily};
use rmaml::harness::{
    binomial_upper_tail, compare_runs, run_experiment, run_sandbox, run_seeds, selftest,
    ExperimentSpec, RunArtifacts,
};
use rmaml::meta::{
    alpha_hypergradient, alpha_update, maml_iteration, rmaml_iteration, AlphaParams, Granularity,
    MetaConfig, MetaState,
};
use rmaml::ptb::{l_at, LSchedule, PtbEntry, Strategy, TaskBuffer};
use rmaml::rng::Stream;

const NAV2D_MAML: &str = include_str!("../examples/configs/nav2d_maml.toml");
const NAV2D_RMAML_MISCALIBRATED: &str =
    include_str!("../examples/configs/nav2d_rmaml_miscalibrated.toml");
const NOISY_VEL_MAML: &str = include_str!("../examples/configs/noisy_vel_maml.toml");
const NOISY_VEL_RMAML: &str = include_str!("../examples/configs/noisy_vel_rmaml.toml");
const REACHING_SANDBOX: &str = include_str!("../examples/configs/reaching_sandbox.toml");

type Check = Result<String, String>;

fn ensure(cond: bool, detail: String) -> Check {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spec_in(text: &str, dir: &Path) -> ExperimentSpec {
    let mut spec = ExperimentSpec::from_toml_str(text).expect("shipped config is valid");
    spec.output_dir = dir.join(&spec.name);
    spec
}

fn ac1() -> Check {
    let started = Instant::now();
    let report = selftest(100, 0).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let worst = report
        .checks
        .iter()
        .map(|c| c.max_relative_error)
        .fold(0.0, f64::max);
    let instances = report.checks.iter().map(|c| c.instances).min().unwrap_or(0);
    ensure(
        report.passed() && instances >= 100 && secs < 60.0,
        format!(
            "{} checks x {instances} instances, worst relative error {worst:.2e}, {secs:.2} s",
            report.checks.len()
        ),
    )
}

fn ac2() -> Check {
    let inner = Quadratic::isotropic(vec![1.0], 1.0);
    let outer = Quadratic::isotropic(vec![2.0], 1.0);
    let theta = ParamVector::flat(vec![0.0]).map_err(|e| e.to_string())?;
    let alpha = AlphaParams::scalar(0.1);
    let train = grad(&inner, &theta).map_err(|e| e.to_string())?;
    let adapted = inner_adapt(&theta, &train, &alpha).map_err(|e| e.to_string())?;
    let val = grad(&outer, &adapted).map_err(|e| e.to_string())?;
    let h = alpha_hypergradient(&[val], std::slice::from_ref(&train), Granularity::Scalar)
        .map_err(|e| e.to_string())?;
    let updated = alpha_update(&alpha, &h, 0.01).map_err(|e| e.to_string())?;
    let fd = central_derivative(
        |a| {
            let p = inner_adapt(&theta, &train, &AlphaParams::scalar(a)).expect("adapt");
            value(&outer, &p).expect("finite")
        },
        0.1,
        DEFAULT_STEP,
    );
    let new_alpha = updated.values()[0];
    ensure(
        (new_alpha - 0.172).abs() < 1e-12 && (fd + 7.2).abs() <= 1e-6,
        format!("alpha 0.1 -> {new_alpha:.12}, finite-difference dL_val/dalpha = {fd:.9}"),
    )
}

fn ac3() -> Check {
    let started = Instant::now();
    let mut spec = ExperimentSpec::from_toml_str(NAV2D_MAML).map_err(|e| e.to_string())?;
    spec.meta.iterations = 50;
    let problem = spec.problem().map_err(|e| e.to_string())?;
    let maml_config = spec.meta.clone();
    let rmaml_config = MetaConfig {
        strategy: Strategy::Uniform,
        alpha_update: false,
        max_l: Some(0),
        ..spec.meta.clone()
    };
    let log_std = spec.policy.log_std_init;
    let mut maml = MetaState::init(&problem, &maml_config, log_std).map_err(|e| e.to_string())?;
    let mut rmaml = MetaState::init(&problem, &rmaml_config, log_std).map_err(|e| e.to_string())?;
    for it in 0..50 {
        maml_iteration(&problem, &maml_config, &mut maml).map_err(|e| e.to_string())?;
        rmaml_iteration(&problem, &rmaml_config, &mut rmaml).map_err(|e| e.to_string())?;
        let same = maml
            .theta
            .values()
            .iter()
            .zip(rmaml.theta.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(format!("theta trajectories diverge at iteration {it}"));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(
        secs < 120.0,
        format!(
            "50 iterations bit-identical ({} parameters), {secs:.1} s",
            maml.theta.len()
        ),
    )
}

fn ac4(dir: &Path) -> Check {
    let started = Instant::now();
    let spec = spec_in(REACHING_SANDBOX, dir);
    let summary = run_sandbox(&spec).map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let get = |s: Strategy| {
        summary
            .strategies
            .iter()
            .find(|x| x.strategy == s)
            .expect("strategy ran")
    };
    let (medium, uniform, easy) = (
        get(Strategy::Medium),
        get(Strategy::Uniform),
        get(Strategy::Easy),
    );
    let wins = summary.medium_beats_uniform.unwrap_or(0);
    let seeds = medium.seeds;
    ensure(
        medium.median_final_distance < uniform.median_final_distance
            && wins * 5 >= seeds * 4
            && easy.captured * 2 > easy.seeds
            && seeds == 50
            && secs < 60.0,
        format!(
            "median distance medium {:.3} < uniform {:.3}; medium wins {wins}/{seeds}; easy captured {}/{}; {secs:.2} s",
            medium.median_final_distance, uniform.median_final_distance, easy.captured, easy.seeds
        ),
    )
}

fn ac5(maml: &RunArtifacts, secs: f64) -> Check {
    let e = &maml.eval;
    let gap = e.step1 - e.step0;
    ensure(
        gap > 0.0 && gap > 3.0 * e.gap_se && e.step0_rollouts == 800 && secs < 900.0,
        format!(
            "step0 {:.3} -> step1 {:.3}, gap {:.3} = {:.1} SE over {} rollouts, {secs:.0} s",
            e.step0,
            e.step1,
            gap,
            gap / e.gap_se,
            e.step0_rollouts
        ),
    )
}

fn ac6(dir: &Path) -> Check {
    let started = Instant::now();
    let seeds: Vec<u64> = (0..10).collect();
    let maml = spec_in(NOISY_VEL_MAML, dir);
    let rmaml = spec_in(NOISY_VEL_RMAML, dir);
    if maml.noise.is_none() || rmaml.noise.is_none() {
        return Err("noisy configs lack a [noise] section".into());
    }
    let m = run_seeds(&maml, &seeds).map_err(|e| e.to_string())?;
    let r = run_seeds(&rmaml, &seeds).map_err(|e| e.to_string())?;
    let wins = m
        .iter()
        .zip(&r)
        .filter(|(a, b)| b.summary.step1 > a.summary.step1)
        .count();
    let p = binomial_upper_tail(wins, seeds.len());
    let report = compare_runs(
        &[rmaml.output_dir.clone(), maml.output_dir.clone()],
        "step1",
    )
    .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    let mean = |runs: &[RunArtifacts]| {
        runs.iter().map(|x| x.summary.step1).sum::<f64>() / runs.len() as f64
    };
    ensure(
        wins >= 8 && p < 0.06 && report.winner == Some(0) && secs < 1800.0,
        format!(
            "RMAML beats MAML on noise-free step-1 in {wins}/10 seeds (sign test p = {p:.4}); mean step1 RMAML {:.3} vs MAML {:.3}; {secs:.0} s",
            mean(&r),
            mean(&m)
        ),
    )
}

fn ac7(dir: &Path, maml: &RunArtifacts) -> Check {
    let spec = spec_in(NAV2D_RMAML_MISCALIBRATED, dir);
    let default_alpha = MetaConfig::default().alpha_init;
    if (spec.meta.alpha_init - 10.0 * default_alpha).abs() > 1e-12 {
        return Err(format!(
            "config starts at alpha {} instead of 10 x default {default_alpha}",
            spec.meta.alpha_init
        ));
    }
    let run = run_experiment(&spec).map_err(|e| e.to_string())?;
    let trace: Vec<f64> = run.history.iter().map(|h| h.alpha_mean).collect();
    let n = trace.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = trace.iter().sum::<f64>() / n;
    let slope = trace
        .iter()
        .enumerate()
        .map(|(i, y)| (i as f64 - x_mean) * (y - y_mean))
        .sum::<f64>()
        / trace
            .iter()
            .enumerate()
            .map(|(i, _)| (i as f64 - x_mean).powi(2))
            .sum::<f64>();
    let final_alpha = *trace.last().expect("non-empty trace");
    let threshold = maml.eval.step1 - maml.eval.step1_se;
    ensure(
        final_alpha < spec.meta.alpha_init && slope < 0.0 && run.eval.step1 >= threshold,
        format!(
            "alpha {:.3} -> {final_alpha:.4} (trend {slope:.2e}/iter); step1 {:.3} vs tuned MAML {:.3} - 1 SE = {threshold:.3}",
            spec.meta.alpha_init, run.eval.step1, maml.eval.step1
        ),
    )
}

fn ac8() -> Check {
    let started = Instant::now();
    let mut rng = Stream::root(8).rng();
    let mut cases = 0;
    for case in 0..500u64 {
        let n = rng.random_range(1..=40);
        let entries: Vec<PtbEntry> = (0..n)
            .map(|i| PtbEntry {
                task: Task::new(TaskFamily::PointVel, vec![i as f64], false).expect("task"),
                val_return: (rng.random_range(-20..0) as f64) * 0.5,
            })
            .collect();
        let mut buffer = TaskBuffer::new();
        buffer.store(entries.clone()).map_err(|e| e.to_string())?;
        let mut sorted: Vec<f64> = entries.iter().map(|e| e.val_return).collect();
        sorted.sort_by(f64::total_cmp);
        let mut stream = Stream::root(case).rng();
        for strategy in Strategy::ALL {
            let l = rng.random_range(0..=n);
            let picked = buffer
                .select_indices(l, strategy, &mut stream)
                .map_err(|e| e.to_string())?;
            let mut unique = picked.clone();
            unique.sort_unstable();
            unique.dedup();
            if picked.len() != l || unique.len() != l || picked.iter().any(|&i| i >= n) {
                return Err(format!(
                    "{} selection of {l} from {n} is not a subset",
                    strategy.name()
                ));
            }
        }
        let median_pick = buffer
            .select_indices(1, Strategy::Medium, &mut stream)
            .map_err(|e| e.to_string())?;
        if entries[median_pick[0]].val_return != sorted[(n - 1) / 2] {
            return Err(format!("medium l=1 misses the median of {n} returns"));
        }
        let everything = buffer
            .select_indices(n, Strategy::Medium, &mut stream)
            .map_err(|e| e.to_string())?;
        if everything.len() != n {
            return Err("medium with l = size does not return every task".into());
        }
        let half = n / 2;
        let easy = buffer
            .select_indices(half, Strategy::Easy, &mut stream)
            .map_err(|e| e.to_string())?;
        let hard = buffer
            .select_indices(half, Strategy::Hard, &mut stream)
            .map_err(|e| e.to_string())?;
        if easy.iter().any(|i| hard.contains(i)) {
            return Err(format!("easy and hard overlap for l = {half} of {n}"));
        }
        cases += 1;
    }
    let examples = [1.0, 2.0, 3.0, 4.0, 5.0];
    let mut buffer = TaskBuffer::new();
    buffer
        .store(
            examples
                .iter()
                .map(|&r| PtbEntry {
                    task: Task::new(TaskFamily::PointVel, vec![r], false).expect("task"),
                    val_return: r,
                })
                .collect(),
        )
        .map_err(|e| e.to_string())?;
    let returns = |l: usize, s: Strategy| -> Vec<f64> {
        buffer
            .select(l, s, &mut Stream::root(0).rng())
            .expect("select")
            .iter()
            .map(|t| t.payload[0])
            .collect()
    };
    if returns(1, Strategy::Medium) != [3.0]
        || returns(3, Strategy::Medium) != [2.0, 3.0, 4.0]
        || returns(2, Strategy::Easy) != [5.0, 4.0]
    {
        return Err("worked selection examples disagree".into());
    }

    let m = MetaConfig::default().meta_batch_size;
    let schedule = MetaConfig::default().schedule();
    let last = schedule.total_iterations - 1;
    let mut monotone = true;
    for it in 1..=last {
        monotone &= l_at(&schedule, it) >= l_at(&schedule, it - 1) && l_at(&schedule, it) <= m / 4;
    }
    let reference = LSchedule {
        max_l: 10,
        total_iterations: 101,
    };
    let secs = started.elapsed().as_secs_f64();
    ensure(
        monotone
            && l_at(&schedule, 0) == 0
            && l_at(&schedule, last) == m / 4
            && schedule.max_l == m / 4
            && l_at(&reference, 50) == 5
            && secs < 5.0,
        format!(
            "{cases} random buffers; l_at(0) = {}, l_at({last}) = {} = M/4 with M = {m}; {secs:.3} s",
            l_at(&schedule, 0),
            l_at(&schedule, last)
        ),
    )
}

fn main() -> ExitCode {
    let wanted: Vec<u8> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let run = |id: u8| wanted.is_empty() || wanted.contains(&id);
    let scratch = tempfile::tempdir().expect("temporary directory");
    let dir = scratch.path();

    let mut results: Vec<(u8, &str, Check)> = Vec::new();
    let mut report = |id: u8, name: &'static str, check: Check| {
        match &check {
            Ok(detail) => println!("AC{id} PASS {name}: {detail}"),
            Err(detail) => println!("AC{id} FAIL {name}: {detail}"),
        }
        results.push((id, name, check));
    };

    if run(1) {
        report(1, "gradient oracle suite", ac1());
    }
    if run(2) {
        report(2, "quadratic hypergradient worked example", ac2());
    }
    if run(3) {
        report(3, "degeneracy equivalence", ac3());
    }
    if run(4) {
        report(4, "2D reaching strategy ordering", ac4(dir));
    }
    if run(5) || run(7) {
        let started = Instant::now();
        let maml = run_experiment(&spec_in(NAV2D_MAML, dir));
        let secs = started.elapsed().as_secs_f64();
        match maml {
            Ok(maml) => {
                if run(5) {
                    report(5, "adaptation gain", ac5(&maml, secs));
                }
                if run(7) {
                    report(7, "alpha adaptivity", ac7(dir, &maml));
                }
            }
            Err(e) => {
                for (id, name) in [(5, "adaptation gain"), (7, "alpha adaptivity")] {
                    if run(id) {
                        report(id, name, Err(format!("tuned MAML run failed: {e}")));
                    }
                }
            }
        }
    }
    if run(6) {
        report(6, "noise robustness", ac6(dir));
    }
    if run(8) {
        report(8, "PTB unit properties", ac8());
    }

    let failed = results.iter().filter(|(_, _, c)| c.is_err()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
