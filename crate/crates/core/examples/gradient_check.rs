//! Checks MLP gradients, exact meta-gradients and α hypergradients against
//! central finite differences.
//!
//! ```text
//! cargo run --release --example gradient_check -- [instances]
//! ```

use rand::Rng;
use rmaml::diffcore::gradcheck::{central_gradient, relative_error, DEFAULT_STEP};
use rmaml::diffcore::objectives::MlpRegression;
use rmaml::diffcore::{grad, hvp, Activation, MlpSpec, Objective};
use rmaml::harness::selftest;
use rmaml::rng::Stream;

fn main() -> rmaml::Result<()> {
    let instances = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("instance count"))
        .unwrap_or(100);

    // One network by hand: the gradient and a Hessian-vector product.
    let mut rng = Stream::root(7).rng();
    let spec = MlpSpec::new(2, vec![4], 1, Activation::Tanh)?;
    let xs: Vec<Vec<f64>> = (0..6)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![(x[0] * 2.0).sin() + x[1]]).collect();
    let loss = MlpRegression::new(spec.clone(), xs, ys)?;
    let theta = spec.init_params(1.0, &mut rng);

    let g = grad(&loss, &theta)?;
    let fd = central_gradient(
        |p| loss.value(p).unwrap_or(f64::NAN),
        theta.values(),
        DEFAULT_STEP,
    );
    println!(
        "{} parameters, gradient vs finite differences: relative error {:.2e}",
        theta.len(),
        relative_error(g.values(), &fd, 1e-6)
    );

    let direction = theta.with_values((0..theta.len()).map(|i| (i as f64).cos()).collect());
    let hv = hvp(&loss, &theta, &direction)?;
    let fd_hv = central_gradient(
        |t| {
            let shifted: Vec<f64> = theta
                .values()
                .iter()
                .zip(direction.values())
                .map(|(a, d)| a + t[0] * d)
                .collect();
            grad(&loss, &theta.with_values(shifted)).map_or(f64::NAN, |g| g.dot(&direction))
        },
        &[0.0],
        DEFAULT_STEP,
    );
    println!(
        "directional curvature v·Hv = {:.6}, finite differences {:.6}",
        hv.dot(&direction),
        fd_hv[0]
    );

    println!("\nrandom oracle suite, {instances} instances per check:");
    let report = selftest(instances, 0)?;
    print!("{report}");
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
