//! Closed-form objectives used by the oracle suite and the examples.

use super::mlp::MlpSpec;
use super::objective::Objective;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// `Σ_j weight_j · (θ_j − center_j)²`
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub center: Vec<f64>,
    pub weight: Vec<f64>,
}

impl Quadratic {
    /// Isotropic bowl `weight · ‖θ − center‖²`.
    pub fn isotropic(center: Vec<f64>, weight: f64) -> Self {
        let weight = vec![weight; center.len()];
        Quadratic { center, weight }
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        let mut loss = S::zero();
        let mut grad = Vec::with_capacity(params.len());
        for ((&p, &c), &w) in params.iter().zip(&self.center).zip(&self.weight) {
            let d = p - S::constant(c);
            loss += (d * d).scale(w);
            grad.push(d.scale(2.0 * w));
        }
        Ok((loss, grad))
    }
}

/// `⟨coef, θ⟩ + bias`; its Hessian is zero.
#[derive(Debug, Clone)]
pub struct Linear {
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl Objective for Linear {
    fn dim(&self) -> usize {
        self.coef.len()
    }

    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        let mut loss = S::constant(self.bias);
        for (&p, &c) in params.iter().zip(&self.coef) {
            loss += p.scale(c);
        }
        Ok((loss, self.coef.iter().map(|&c| S::constant(c)).collect()))
    }
}

/// A loss that ignores its parameters.
#[derive(Debug, Clone)]
pub struct Constant {
    pub dim: usize,
    pub value: f64,
}

impl Objective for Constant {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value_and_grad<S: Scalar>(&self, _params: &[S]) -> Result<(S, Vec<S>)> {
        Ok((S::constant(self.value), vec![S::zero(); self.dim]))
    }
}

/// Mean squared error of an MLP on a fixed dataset, `1/(2N) Σ ‖f(x) − y‖²`.
#[derive(Debug, Clone)]
pub struct MlpRegression {
    spec: MlpSpec,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl MlpRegression {
    pub fn new(spec: MlpSpec, inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::dim(
                "regression dataset",
                inputs.len(),
                targets.len(),
            ));
        }
        for (x, y) in inputs.iter().zip(&targets) {
            if x.len() != spec.input_dim {
                return Err(Error::dim("regression input", spec.input_dim, x.len()));
            }
            if y.len() != spec.output_dim {
                return Err(Error::dim("regression target", spec.output_dim, y.len()));
            }
        }
        Ok(MlpRegression {
            spec,
            inputs,
            targets,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }
}

impl Objective for MlpRegression {
    fn dim(&self) -> usize {
        self.spec.param_count()
    }

    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        let scale = 1.0 / self.inputs.len() as f64;
        let mut loss = S::zero();
        let mut grad = vec![S::zero(); params.len()];
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let x: Vec<S> = x.iter().map(|&v| S::constant(v)).collect();
            let cache = self.spec.forward_cached(params, &x);
            let residual: Vec<S> = cache
                .output()
                .iter()
                .zip(y)
                .map(|(&o, &t)| o - S::constant(t))
                .collect();
            for &r in &residual {
                loss += (r * r).scale(0.5 * scale);
            }
            let d_out: Vec<S> = residual.iter().map(|&r| r.scale(scale)).collect();
            self.spec.backward(params, &cache, &d_out, &mut grad);
        }
        Ok((loss, grad))
    }
}
