//! One-dimensional quadratic meta-learning problem worked by hand.
//!
//! Inner loss `(θ − 1)²`, outer loss `(θ − 2)²`, θ = 0, α = 0.1. Prints the
//! exact and first-order meta-gradients, the α hypergradient with its
//! finite-difference counterpart, and a few rounds of the α update.

use rmaml::diffcore::gradcheck::{central_derivative, DEFAULT_STEP};
use rmaml::diffcore::objectives::Quadratic;
use rmaml::diffcore::{grad, inner_adapt, meta_grad, value, GradMode, ParamVector};
use rmaml::meta::{alpha_hypergradient, alpha_update, AlphaParams, Granularity};

fn main() -> rmaml::Result<()> {
    let inner = Quadratic::isotropic(vec![1.0], 1.0);
    let outer = Quadratic::isotropic(vec![2.0], 1.0);
    let theta = ParamVector::flat(vec![0.0])?;
    let mut alpha = AlphaParams::scalar(0.1);

    let exact = meta_grad(&outer, &inner, &theta, &alpha, GradMode::ExactSecondOrder)?;
    let first = meta_grad(&outer, &inner, &theta, &alpha, GradMode::FirstOrderApprox)?;
    println!(
        "meta-gradient: exact {:.4}, first-order {:.4}",
        exact.values()[0],
        first.values()[0]
    );

    let train = grad(&inner, &theta)?;
    println!("\n round   alpha     theta'    L_val    hypergrad   -dL/dalpha (FD)");
    for round in 0..5 {
        let adapted = inner_adapt(&theta, &train, &alpha)?;
        let val = grad(&outer, &adapted)?;
        let h = alpha_hypergradient(&[val], std::slice::from_ref(&train), Granularity::Scalar)?;
        let a = alpha.values()[0];
        let fd = -central_derivative(
            |x| {
                value(
                    &outer,
                    &inner_adapt(&theta, &train, &AlphaParams::scalar(x)).expect("adapt"),
                )
                .expect("finite")
            },
            a,
            DEFAULT_STEP,
        );
        println!(
            "{round:>6} {a:>8.4} {:>9.4} {:>8.4} {:>11.4} {fd:>14.4}",
            adapted.values()[0],
            value(&outer, &adapted)?,
            h[0],
        );
        alpha = alpha_update(&alpha, &h, 0.01)?;
    }
    Ok(())
}
