//! Hypergradient of the post-adaptation validation loss with respect to the
//! learner learning rate, and the additive α update.

use super::alpha::{AlphaParams, Granularity};
use crate::diffcore::ParamVector;
use crate::error::{Error, Result};

/// `Σ_i ⟨∇θ' L_val,i , ∇θ L_train,i⟩`, restricted per layer or per parameter
/// according to `granularity`.
///
/// Since `∂L_val(θ − α g_train)/∂α = −⟨∇θ' L_val, g_train⟩`, this is the
/// *negative* α-gradient: callers add `α₀ · result` to α.
pub fn alpha_hypergradient(
    val_grads: &[ParamVector],
    train_grads: &[ParamVector],
    granularity: Granularity,
) -> Result<Vec<f64>> {
    if val_grads.len() != train_grads.len() {
        return Err(Error::dim(
            "hypergradient task count",
            train_grads.len(),
            val_grads.len(),
        ));
    }
    let Some(first) = train_grads.first() else {
        return Err(Error::InvalidArgument(
            "hypergradient needs at least one task".into(),
        ));
    };
    let mut out = vec![0.0; AlphaParams::expected_len(granularity, first)];
    for (v, t) in val_grads.iter().zip(train_grads) {
        v.check_same_layout(t, "hypergradient gradients")?;
        first.check_same_layout(t, "hypergradient gradients")?;
        match granularity {
            Granularity::Scalar => out[0] += v.dot(t),
            Granularity::PerLayer => {
                for (slot, slice) in out.iter_mut().zip(t.layers()) {
                    let r = slice.range();
                    *slot += v.values()[r.clone()]
                        .iter()
                        .zip(&t.values()[r])
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                }
            }
            Granularity::PerParameter => {
                for ((slot, a), b) in out.iter_mut().zip(v.values()).zip(t.values()) {
                    *slot += a * b;
                }
            }
        }
    }
    Ok(out)
}

/// `α ← max(floor, α + α₀ · hypergrad)` elementwise.
pub fn alpha_update(alpha: &AlphaParams, hypergrad: &[f64], alpha0: f64) -> Result<AlphaParams> {
    if hypergrad.len() != alpha.values().len() {
        return Err(Error::dim(
            "alpha hypergradient",
            alpha.values().len(),
            hypergrad.len(),
        ));
    }
    if let Some(h) = hypergrad.iter().find(|h| !h.is_finite()) {
        return Err(Error::non_finite("alpha hypergradient", *h));
    }
    let proposed = alpha
        .values()
        .iter()
        .zip(hypergrad)
        .map(|(a, h)| a + alpha0 * h)
        .collect();
    let (next, clamped) = alpha.with_values_clamped(proposed);
    if clamped > 0 {
        log::warn!(
            "learner learning rate hit the floor {} in {clamped} component(s)",
            alpha.floor()
        );
    }
    Ok(next)
}

/// Clamps each hypergradient component so that one update moves the matching
/// α component by at most `max_step · α` (relative to its current value).
pub fn limit_hypergradient(
    alpha: &AlphaParams,
    hypergrad: &[f64],
    alpha0: f64,
    max_step: f64,
) -> Vec<f64> {
    alpha
        .values()
        .iter()
        .zip(hypergrad)
        .map(|(a, h)| {
            let bound = max_step * a / alpha0;
            h.clamp(-bound, bound)
        })
        .collect()
}
