use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::diffcore::gradcheck::{
    central_derivative, central_gradient, relative_error, DEFAULT_STEP,
};
use crate::diffcore::objectives::MlpRegression;
use crate::diffcore::{
    grad, inner_adapt, meta_grad, value, Activation, GradMode, MlpSpec, Objective, ParamVector,
};
use crate::error::Result;
use crate::meta::{alpha_hypergradient, AlphaParams, Granularity};
use crate::rng::Stream;

/// Largest accepted relative error against central finite differences.
pub const TOLERANCE: f64 = 1e-4;

/// Reference scale below which errors are measured absolutely.
const ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
    pub elapsed_ms: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for SelftestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {:<34} {:>4} instances, max rel. error {:.3e} (tolerance {:.0e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.instances,
                c.max_relative_error,
                TOLERANCE
            )?;
        }
        writeln!(f, "elapsed {:.1} s", self.elapsed_ms / 1e3)
    }
}

/// A random small tanh regression problem sharing one network shape
/// between `tasks` datasets, plus a random parameter vector.
fn random_instance<R: Rng>(rng: &mut R, tasks: usize) -> (Vec<MlpRegression>, ParamVector) {
    let input = rng.random_range(1..=3);
    let output = rng.random_range(1..=2);
    let depth = rng.random_range(1..=2);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(2..=4)).collect();
    let spec = MlpSpec::new(input, hidden, output, Activation::Tanh).expect("valid shape");
    let losses = (0..tasks)
        .map(|_| {
            let n = rng.random_range(2..=5);
            let xs = (0..n)
                .map(|_| (0..input).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let ys = (0..n)
                .map(|_| (0..output).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            MlpRegression::new(spec.clone(), xs, ys).expect("consistent dataset")
        })
        .collect();
    let params = spec.init_params(1.0, rng);
    (losses, params)
}

fn random_alpha<R: Rng>(
    rng: &mut R,
    granularity: Granularity,
    layout: &ParamVector,
) -> AlphaParams {
    let len = AlphaParams::expected_len(granularity, layout);
    let values = (0..len).map(|_| rng.random_range(0.02..0.3)).collect();
    AlphaParams::new(granularity, values, 0.0).expect("positive rates")
}

struct Tracker {
    name: String,
    instances: usize,
    worst: f64,
}

impl Tracker {
    fn new(name: &str) -> Self {
        Tracker {
            name: name.into(),
            instances: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, err: f64) {
        self.instances += 1;
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    fn finish(self) -> CheckResult {
        CheckResult {
            passed: self.worst <= TOLERANCE,
            name: self.name,
            instances: self.instances,
            max_relative_error: self.worst,
        }
    }
}

/// Gradient and hypergradient oracle suite over `instances` random small
/// problems per check.
pub fn selftest(instances: usize, seed: u64) -> Result<SelftestReport> {
    let started = Instant::now();
    let root = Stream::root(seed).named("selftest");

    let mut mlp = Tracker::new("MLP gradient");
    let mut exact = Tracker::new("exact meta-gradient");
    let mut hyper: Vec<(Granularity, Tracker)> = [
        (Granularity::Scalar, "alpha hypergradient (scalar)"),
        (Granularity::PerLayer, "alpha hypergradient (per-layer)"),
        (
            Granularity::PerParameter,
            "alpha hypergradient (per-parameter)",
        ),
    ]
    .into_iter()
    .map(|(g, name)| (g, Tracker::new(name)))
    .collect();
    let granularities = [
        Granularity::Scalar,
        Granularity::PerLayer,
        Granularity::PerParameter,
    ];

    for i in 0..instances as u64 {
        let mut rng = root.child(i).rng();

        let (losses, theta) = random_instance(&mut rng, 1);
        let g = grad(&losses[0], &theta)?;
        let fd = central_gradient(
            |x| losses[0].value(x).unwrap_or(f64::NAN),
            theta.values(),
            DEFAULT_STEP,
        );
        mlp.record(relative_error(g.values(), &fd, ERROR_FLOOR));

        let (losses, theta) = random_instance(&mut rng, 2);
        let (inner, outer) = (&losses[0], &losses[1]);
        let granularity = granularities[(i % 3) as usize];
        let alpha = random_alpha(&mut rng, granularity, &theta);
        let analytic = meta_grad(outer, inner, &theta, &alpha, GradMode::ExactSecondOrder)?;
        let composite = |x: &[f64]| -> f64 {
            let t = theta.with_values(x.to_vec());
            let adapted = grad(inner, &t).and_then(|g| inner_adapt(&t, &g, &alpha));
            match adapted {
                Ok(a) => outer.value(a.values()).unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            }
        };
        let fd = central_gradient(composite, theta.values(), DEFAULT_STEP);
        exact.record(relative_error(analytic.values(), &fd, ERROR_FLOOR));

        let tasks = rng.random_range(1..=3);
        let (losses, theta) = random_instance(&mut rng, 2 * tasks);
        let (trains, vals) = losses.split_at(tasks);
        let train_grads: Vec<ParamVector> = trains
            .iter()
            .map(|l| grad(l, &theta))
            .collect::<Result<_>>()?;
        for (granularity, tracker) in hyper.iter_mut() {
            let alpha = random_alpha(&mut rng, *granularity, &theta);
            let mut val_grads = Vec::with_capacity(tasks);
            for (g, val) in train_grads.iter().zip(vals) {
                val_grads.push(grad(val, &inner_adapt(&theta, g, &alpha)?)?);
            }
            let h = alpha_hypergradient(&val_grads, &train_grads, *granularity)?;
            let total_val = |a: &AlphaParams| -> f64 {
                let mut sum = 0.0;
                for (g, val) in train_grads.iter().zip(vals) {
                    match inner_adapt(&theta, g, a).and_then(|p| value(val, &p)) {
                        Ok(v) => sum += v,
                        Err(_) => return f64::NAN,
                    }
                }
                sum
            };
            // The hypergradient is the negative α-derivative of the summed
            // validation loss.
            let fd: Vec<f64> = (0..alpha.values().len())
                .map(|k| {
                    -central_derivative(
                        |ak| {
                            let mut v = alpha.values().to_vec();
                            v[k] = ak;
                            total_val(&AlphaParams::new(*granularity, v, 0.0).expect("rates"))
                        },
                        alpha.values()[k],
                        DEFAULT_STEP,
                    )
                })
                .collect();
            tracker.record(relative_error(&h, &fd, ERROR_FLOOR));
        }
    }

    let mut checks = vec![mlp.finish(), exact.finish()];
    checks.extend(hyper.into_iter().map(|(_, t)| t.finish()));
    Ok(SelftestReport {
        checks,
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
