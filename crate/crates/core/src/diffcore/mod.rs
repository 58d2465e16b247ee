//! Differentiable computation for small dense networks: forward passes,
//! gradients, Hessian-vector products, and meta-gradients through one inner
//! gradient step.

pub mod gradcheck;
mod mlp;
mod objective;
pub mod objectives;
mod params;
mod scalar;

pub use mlp::{mlp_forward, Activation, ForwardCache, MlpSpec};
pub use objective::{
    grad, hvp, inner_adapt, meta_grad, meta_grad_from_outer, meta_grad_parts, value,
    value_and_grad, GradMode, MetaGradient, Objective,
};
pub use params::{LayerSlice, ParamVector};
pub use scalar::{Dual, Scalar};

#[cfg(test)]
mod tests {
    use super::gradcheck::{central_gradient, relative_error, DEFAULT_STEP};
    use super::objectives::{Constant, Linear, MlpRegression, Quadratic};
    use super::*;
    use crate::meta::{AlphaParams, Granularity};
    use crate::rng::Stream;
    use rand::Rng;

    fn p(values: &[f64]) -> ParamVector {
        ParamVector::flat(values.to_vec()).unwrap()
    }

    fn random_regression(seed: u64, act: Activation) -> (MlpRegression, ParamVector) {
        let mut rng = Stream::root(seed).rng();
        let spec = MlpSpec::new(3, vec![4, 3], 2, act).unwrap();
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let params = spec.init_params(1.0, &mut rng);
        (MlpRegression::new(spec, inputs, targets).unwrap(), params)
    }

    #[test]
    fn half_squared_norm_gradient() {
        let q = Quadratic::isotropic(vec![0.0, 0.0], 0.5);
        let g = grad(&q, &p(&[1.0, -2.0])).unwrap();
        assert_eq!(g.values(), &[1.0, -2.0]);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let c = Constant { dim: 3, value: 4.2 };
        let g = grad(&c, &p(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(g.values(), &[0.0; 3]);
    }

    #[test]
    fn non_finite_loss_reports_value() {
        let c = Constant {
            dim: 1,
            value: f64::INFINITY,
        };
        match grad(&c, &p(&[0.0])) {
            Err(crate::Error::NonFinite { value, .. }) => assert_eq!(value, f64::INFINITY),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        for seed in 0..100 {
            let (loss, params) = random_regression(seed, Activation::Tanh);
            let g = grad(&loss, &params).unwrap();
            let fd = central_gradient(|x| loss.value(x).unwrap(), params.values(), DEFAULT_STEP);
            let err = relative_error(g.values(), &fd, 1e-8);
            assert!(err <= 1e-5, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn relu_gradient_away_from_kinks() {
        let (loss, params) = random_regression(3, Activation::Relu);
        let g = grad(&loss, &params).unwrap();
        let fd = central_gradient(|x| loss.value(x).unwrap(), params.values(), DEFAULT_STEP);
        assert!(relative_error(g.values(), &fd, 1e-8) <= 1e-5);
    }

    #[test]
    fn hvp_matches_finite_difference_of_gradient() {
        let (loss, params) = random_regression(5, Activation::Tanh);
        let mut rng = Stream::root(99).rng();
        let v = params.with_values(
            (0..params.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        );
        let hv = hvp(&loss, &params, &v).unwrap();
        let h = 1e-5;
        let mut up = params.clone();
        up.axpy(h, &v);
        let mut down = params.clone();
        down.axpy(-h, &v);
        let gu = grad(&loss, &up).unwrap();
        let gd = grad(&loss, &down).unwrap();
        let fd: Vec<f64> = gu
            .values()
            .iter()
            .zip(gd.values())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        assert!(relative_error(hv.values(), &fd, 1e-8) <= 1e-5);
    }

    #[test]
    fn inner_adapt_examples() {
        // L = (θ − 1)², g(0) = −2, α = 0.5 → θ' = 1
        let inner = Quadratic::isotropic(vec![1.0], 1.0);
        let theta = p(&[0.0]);
        let g = grad(&inner, &theta).unwrap();
        assert_eq!(g.values(), &[-2.0]);
        let adapted = inner_adapt(&theta, &g, &AlphaParams::scalar(0.5)).unwrap();
        assert_eq!(adapted.values(), &[1.0]);

        let adapted = inner_adapt(&theta, &g, &AlphaParams::scalar(0.0)).unwrap();
        assert_eq!(adapted.values(), theta.values());
    }

    #[test]
    fn per_layer_alpha_broadcasts() {
        let spec = MlpSpec::new(1, vec![2], 1, Activation::Tanh).unwrap();
        let theta = spec.params_from(vec![0.0; spec.param_count()]).unwrap();
        let ones = theta.with_values(vec![1.0; theta.len()]);
        let alpha = AlphaParams::new(Granularity::PerLayer, vec![0.1, 0.2], 0.0).unwrap();
        let adapted = inner_adapt(&theta, &ones, &alpha).unwrap();
        assert!(adapted.layer(0).iter().all(|&v| v == -0.1));
        assert!(adapted.layer(1).iter().all(|&v| v == -0.2));
    }

    #[test]
    fn alpha_granularity_mismatch_is_an_error() {
        let theta = p(&[0.0, 1.0]);
        let alpha = AlphaParams::new(Granularity::PerParameter, vec![0.1; 3], 0.0).unwrap();
        assert!(inner_adapt(&theta, &theta, &alpha).is_err());
    }

    #[test]
    fn quadratic_meta_gradient_worked_example() {
        // inner (θ−1)², outer (θ−2)², θ=0, α=0.1: θ'=0.2,
        // exact = 2(θ'−2)(1−2α) = −2.88, first-order = 2(θ'−2) = −3.6
        let inner = Quadratic::isotropic(vec![1.0], 1.0);
        let outer = Quadratic::isotropic(vec![2.0], 1.0);
        let theta = p(&[0.0]);
        let alpha = AlphaParams::scalar(0.1);
        let parts =
            meta_grad_parts(&outer, &inner, &theta, &alpha, GradMode::ExactSecondOrder).unwrap();
        assert!((parts.adapted.values()[0] - 0.2).abs() < 1e-15);
        assert!((parts.meta_grad.values()[0] + 2.88).abs() < 1e-12);
        let approx = meta_grad(&outer, &inner, &theta, &alpha, GradMode::FirstOrderApprox).unwrap();
        assert!((approx.values()[0] + 3.6).abs() < 1e-12);

        // the composite map checked by finite differences
        let composite = |t: f64| {
            let adapted = t - 0.1 * 2.0 * (t - 1.0);
            (adapted - 2.0).powi(2)
        };
        let fd = gradcheck::central_derivative(composite, 0.0, DEFAULT_STEP);
        assert!((fd + 2.88).abs() < 1e-8);
    }

    #[test]
    fn zero_alpha_reduces_to_plain_gradient() {
        let (inner, theta) = random_regression(1, Activation::Tanh);
        let (outer, _) = random_regression(2, Activation::Tanh);
        let alpha = AlphaParams::scalar(0.0);
        let plain = grad(&outer, &theta).unwrap();
        for mode in [GradMode::ExactSecondOrder, GradMode::FirstOrderApprox] {
            let m = meta_grad(&outer, &inner, &theta, &alpha, mode).unwrap();
            assert!(relative_error(m.values(), plain.values(), 1e-12) < 1e-14);
        }
    }

    #[test]
    fn exact_meta_gradient_matches_composite_finite_differences() {
        for seed in 0..20 {
            let (inner, theta) = random_regression(100 + seed, Activation::Tanh);
            let (outer, _) = random_regression(200 + seed, Activation::Tanh);
            let alpha = AlphaParams::scalar(0.3);
            let exact =
                meta_grad(&outer, &inner, &theta, &alpha, GradMode::ExactSecondOrder).unwrap();
            let composite = |x: &[f64]| {
                let t = theta.with_values(x.to_vec());
                let g = grad(&inner, &t).unwrap();
                let adapted = inner_adapt(&t, &g, &alpha).unwrap();
                outer.value(adapted.values()).unwrap()
            };
            let fd = central_gradient(composite, theta.values(), DEFAULT_STEP);
            let err = relative_error(exact.values(), &fd, 1e-8);
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn linear_inner_loss_makes_modes_agree() {
        let (outer, theta) = random_regression(7, Activation::Tanh);
        let mut rng = Stream::root(8).rng();
        let inner = Linear {
            coef: (0..theta.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            bias: 0.3,
        };
        let alpha = AlphaParams::scalar(0.2);
        let exact = meta_grad(&outer, &inner, &theta, &alpha, GradMode::ExactSecondOrder).unwrap();
        let approx = meta_grad(&outer, &inner, &theta, &alpha, GradMode::FirstOrderApprox).unwrap();
        assert_eq!(exact.values(), approx.values());
    }
}
