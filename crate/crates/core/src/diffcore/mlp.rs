//! Small dense multilayer perceptrons.
//!
//! Parameters are stored layer by layer; each dense layer holds its weight
//! matrix (row-major, `out × in`) followed by its bias. Hidden layers apply
//! the activation, the output layer is linear.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::params::{LayerSlice, ParamVector};
use super::scalar::Scalar;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    fn apply<S: Scalar>(self, x: S) -> S {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x.value() > 0.0 {
                    x
                } else {
                    S::zero()
                }
            }
        }
    }

    /// Derivative expressed through the post-activation output `y`.
    #[inline]
    fn derivative_from_output<S: Scalar>(self, y: S) -> S {
        match self {
            Activation::Tanh => S::constant(1.0) - y * y,
            Activation::Relu => S::constant(if y.value() > 0.0 { 1.0 } else { 0.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

/// Per-layer activations kept for the reverse pass.
///
/// `activations[0]` is the input; `activations[l + 1]` is the output of layer `l`.
#[derive(Debug, Clone)]
pub struct ForwardCache<S> {
    activations: Vec<Vec<S>>,
}

impl<S: Scalar> ForwardCache<S> {
    pub fn output(&self) -> &[S] {
        self.activations
            .last()
            .expect("cache holds the input at least")
    }
}

impl MlpSpec {
    pub fn new(
        input_dim: usize,
        hidden_sizes: Vec<usize>,
        output_dim: usize,
        activation: Activation,
    ) -> Result<Self> {
        let spec = MlpSpec {
            input_dim,
            hidden_sizes,
            output_dim,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "MLP layer sizes must be positive".into(),
            ));
        }
        Ok(())
    }

    /// All layer widths, input first.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden_sizes.len() + 2);
        sizes.push(self.input_dim);
        sizes.extend_from_slice(&self.hidden_sizes);
        sizes.push(self.output_dim);
        sizes
    }

    pub fn num_dense_layers(&self) -> usize {
        self.hidden_sizes.len() + 1
    }

    pub fn layer_map(&self) -> Vec<LayerSlice> {
        let sizes = self.layer_sizes();
        let mut offset = 0;
        sizes
            .windows(2)
            .enumerate()
            .map(|(layer_id, w)| {
                let len = w[0] * w[1] + w[1];
                let slice = LayerSlice {
                    layer_id,
                    offset,
                    len,
                };
                offset += len;
                slice
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_map().iter().map(|l| l.len).sum()
    }

    /// Wraps raw values in a [`ParamVector`] with this network's layout.
    pub fn params_from(&self, values: Vec<f64>) -> Result<ParamVector> {
        self.check_param_len(values.len())?;
        ParamVector::new(values, self.layer_map(), self.layer_sizes())
    }

    /// Gaussian init with variance `1/fan_in`, zero biases; the output layer
    /// is additionally scaled by `output_scale`.
    pub fn init_params<R: Rng + ?Sized>(&self, output_scale: f64, rng: &mut R) -> ParamVector {
        let sizes = self.layer_sizes();
        let last = sizes.len() - 2;
        let mut values = Vec::with_capacity(self.param_count());
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut std = 1.0 / (fan_in as f64).sqrt();
            if l == last {
                std *= output_scale;
            }
            for _ in 0..fan_in * fan_out {
                let z: f64 = StandardNormal.sample(rng);
                values.push(std * z);
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        }
        self.params_from(values).expect("init layout matches spec")
    }

    fn check_param_len(&self, len: usize) -> Result<()> {
        let expected = self.param_count();
        if len == expected {
            return Ok(());
        }
        // Name the first dense layer that does not fit.
        let sizes = self.layer_sizes();
        for layer in self.layer_map() {
            if layer.offset + layer.len > len {
                return Err(Error::dim(
                    format!(
                        "parameters of layer {} ({} -> {})",
                        layer.layer_id,
                        sizes[layer.layer_id],
                        sizes[layer.layer_id + 1]
                    ),
                    layer.len,
                    len.saturating_sub(layer.offset),
                ));
            }
        }
        Err(Error::dim(
            "parameter vector (trailing values)",
            expected,
            len,
        ))
    }

    /// Forward pass keeping activations for [`MlpSpec::backward`].
    ///
    /// `params` must hold at least `param_count()` values; trailing values
    /// (e.g. a policy's log-std) are ignored.
    pub fn forward_cached<S: Scalar>(&self, params: &[S], input: &[S]) -> ForwardCache<S> {
        debug_assert_eq!(input.len(), self.input_dim);
        let sizes = self.layer_sizes();
        let n_layers = sizes.len() - 1;
        let mut activations = Vec::with_capacity(sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let weights = &params[offset..offset + fan_in * fan_out];
            let bias = &params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let x = &activations[l];
            let mut y = Vec::with_capacity(fan_out);
            for o in 0..fan_out {
                let row = &weights[o * fan_in..(o + 1) * fan_in];
                let mut acc = bias[o];
                for (w, xi) in row.iter().zip(x) {
                    acc += *w * *xi;
                }
                y.push(if l + 1 < n_layers {
                    self.activation.apply(acc)
                } else {
                    acc
                });
            }
            activations.push(y);
        }
        ForwardCache { activations }
    }

    /// Reverse pass: accumulates `∂(d_output · f(params, input)) / ∂params`
    /// into `grad` (same layout as `params`).
    pub fn backward<S: Scalar>(
        &self,
        params: &[S],
        cache: &ForwardCache<S>,
        d_output: &[S],
        grad: &mut [S],
    ) {
        let sizes = self.layer_sizes();
        let n_layers = sizes.len() - 1;
        let layer_map = self.layer_map();
        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            if l + 1 < n_layers {
                for (d, y) in delta.iter_mut().zip(&cache.activations[l + 1]) {
                    *d = *d * self.activation.derivative_from_output(*y);
                }
            }
            let offset = layer_map[l].offset;
            let x = &cache.activations[l];
            let weights = &params[offset..offset + fan_in * fan_out];
            let mut next = vec![S::zero(); fan_in];
            for o in 0..fan_out {
                let d = delta[o];
                let row = offset + o * fan_in;
                for i in 0..fan_in {
                    grad[row + i] += d * x[i];
                    next[i] += weights[o * fan_in + i] * d;
                }
                grad[offset + fan_in * fan_out + o] += d;
            }
            delta = next;
        }
    }
}

/// Evaluates the network on one input.
pub fn mlp_forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_dim {
        return Err(Error::dim("input of layer 0", spec.input_dim, input.len()));
    }
    spec.check_param_len(params.len())?;
    Ok(spec
        .forward_cached(params.values(), input)
        .output()
        .to_vec())
}
