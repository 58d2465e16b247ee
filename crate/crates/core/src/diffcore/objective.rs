//! Differentiable objectives, gradients, and meta-gradients through one
//! inner gradient step.

use serde::{Deserialize, Serialize};

use super::params::ParamVector;
use super::scalar::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::meta::AlphaParams;

/// A scalar loss with a hand-written reverse pass.
///
/// Implementations evaluate the loss and its gradient for any [`Scalar`];
/// instantiating with [`Dual`] gives Hessian-vector products for free.
pub trait Objective: Sync {
    /// Number of parameters the loss expects.
    fn dim(&self) -> usize;

    /// Loss value and gradient at `params`.
    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)>;

    /// Loss value only. Override when a cheaper forward pass exists.
    fn value(&self, params: &[f64]) -> Result<f64> {
        Ok(self.value_and_grad(params)?.0)
    }
}

impl<O: Objective> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value_and_grad<S: Scalar>(&self, params: &[S]) -> Result<(S, Vec<S>)> {
        (**self).value_and_grad(params)
    }
    fn value(&self, params: &[f64]) -> Result<f64> {
        (**self).value(params)
    }
}

/// How the meta-gradient treats the dependence of θ' on θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    /// Full derivative through the inner step, including the Hessian term.
    #[default]
    ExactSecondOrder,
    /// Treats θ' as independent of θ (drops the Hessian term).
    FirstOrderApprox,
}

fn check_dim<O: Objective>(objective: &O, params: &ParamVector) -> Result<()> {
    if objective.dim() != params.len() {
        return Err(Error::dim(
            "objective parameters",
            objective.dim(),
            params.len(),
        ));
    }
    Ok(())
}

fn first_non_finite(values: &[f64]) -> Option<f64> {
    values.iter().copied().find(|v| !v.is_finite())
}

/// Loss value at `params`.
pub fn value<O: Objective>(objective: &O, params: &ParamVector) -> Result<f64> {
    check_dim(objective, params)?;
    let v = objective.value(params.values())?;
    if !v.is_finite() {
        return Err(Error::non_finite("loss evaluation", v));
    }
    Ok(v)
}

fn grad_in_phase<O: Objective>(
    objective: &O,
    params: &ParamVector,
    phase: &str,
) -> Result<ParamVector> {
    check_dim(objective, params)?;
    let (loss, g) = objective.value_and_grad::<f64>(params.values())?;
    if !loss.is_finite() {
        return Err(Error::non_finite(format!("{phase} (loss)"), loss));
    }
    if let Some(v) = first_non_finite(&g) {
        return Err(Error::non_finite(format!("{phase} (gradient)"), v));
    }
    Ok(params.with_values(g))
}

/// Gradient of `objective` at `params`, with the layout of `params`.
pub fn grad<O: Objective>(objective: &O, params: &ParamVector) -> Result<ParamVector> {
    grad_in_phase(objective, params, "gradient")
}

/// Loss value and gradient in one pass.
pub fn value_and_grad<O: Objective>(
    objective: &O,
    params: &ParamVector,
) -> Result<(f64, ParamVector)> {
    check_dim(objective, params)?;
    let (loss, g) = objective.value_and_grad::<f64>(params.values())?;
    if !loss.is_finite() {
        return Err(Error::non_finite("loss evaluation", loss));
    }
    if let Some(v) = first_non_finite(&g) {
        return Err(Error::non_finite("gradient", v));
    }
    Ok((loss, params.with_values(g)))
}

/// Hessian-vector product `∇²L(params) · direction`, by forward-mode
/// differentiation of the reverse pass.
pub fn hvp<O: Objective>(
    objective: &O,
    params: &ParamVector,
    direction: &ParamVector,
) -> Result<ParamVector> {
    check_dim(objective, params)?;
    params.check_same_layout(direction, "HVP direction")?;
    let seeded: Vec<Dual> = params
        .values()
        .iter()
        .zip(direction.values())
        .map(|(&p, &d)| Dual::new(p, d))
        .collect();
    let (_, g) = objective.value_and_grad(&seeded)?;
    let out: Vec<f64> = g.iter().map(|d| d.tangent).collect();
    if let Some(v) = first_non_finite(&out) {
        return Err(Error::non_finite("HVP", v));
    }
    Ok(params.with_values(out))
}

/// One inner gradient step: `θ'[j] = θ[j] − α[j]·g[j]`.
pub fn inner_adapt(
    params: &ParamVector,
    train_grad: &ParamVector,
    alpha: &AlphaParams,
) -> Result<ParamVector> {
    params.check_same_layout(train_grad, "inner adaptation gradient")?;
    let rates = alpha.expand(params)?;
    let adapted = params
        .values()
        .iter()
        .zip(train_grad.values())
        .zip(&rates)
        .map(|((&p, &g), &a)| p - a * g)
        .collect();
    Ok(params.with_values(adapted))
}

/// Intermediate quantities of one meta-gradient evaluation.
#[derive(Debug, Clone)]
pub struct MetaGradient {
    /// ∇θ L_train(θ)
    pub train_grad: ParamVector,
    /// θ' = θ − α ∇θ L_train(θ)
    pub adapted: ParamVector,
    /// ∇θ' L_val(θ')
    pub outer_grad: ParamVector,
    /// d L_val(θ') / dθ under the chosen [`GradMode`]
    pub meta_grad: ParamVector,
}

/// Converts `∇θ' L_val(θ')` into the meta-gradient with respect to θ.
///
/// Exact mode applies the transpose Jacobian of the inner step,
/// `(I − H diag(α)) ∇θ' L_val = ∇θ' L_val − H (α ⊙ ∇θ' L_val)`, where `H` is
/// the inner-loss Hessian at θ.
pub fn meta_grad_from_outer<I: Objective>(
    inner: &I,
    params: &ParamVector,
    alpha: &AlphaParams,
    outer_grad: &ParamVector,
    mode: GradMode,
) -> Result<ParamVector> {
    params.check_same_layout(outer_grad, "outer gradient")?;
    match mode {
        GradMode::FirstOrderApprox => Ok(outer_grad.clone()),
        GradMode::ExactSecondOrder => {
            let rates = alpha.expand(params)?;
            let direction = params.with_values(
                outer_grad
                    .values()
                    .iter()
                    .zip(&rates)
                    .map(|(g, a)| g * a)
                    .collect(),
            );
            let hv = hvp(inner, params, &direction)?;
            let mut total = outer_grad.clone();
            total.axpy(-1.0, &hv);
            Ok(total)
        }
    }
}

/// Full meta-gradient with fixed inner and outer losses.
pub fn meta_grad_parts<O: Objective, I: Objective>(
    outer: &O,
    inner: &I,
    params: &ParamVector,
    alpha: &AlphaParams,
    mode: GradMode,
) -> Result<MetaGradient> {
    let train_grad = grad_in_phase(inner, params, "inner grad")?;
    let adapted = inner_adapt(params, &train_grad, alpha)?;
    let outer_grad = grad_in_phase(outer, &adapted, "outer grad")?;
    let meta_grad = meta_grad_from_outer(inner, params, alpha, &outer_grad, mode)?;
    Ok(MetaGradient {
        train_grad,
        adapted,
        outer_grad,
        meta_grad,
    })
}

/// `d L_outer(θ − α ∇L_inner(θ)) / dθ`.
pub fn meta_grad<O: Objective, I: Objective>(
    outer: &O,
    inner: &I,
    params: &ParamVector,
    alpha: &AlphaParams,
    mode: GradMode,
) -> Result<ParamVector> {
    Ok(meta_grad_parts(outer, inner, params, alpha, mode)?.meta_grad)
}
