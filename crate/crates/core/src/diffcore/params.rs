use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous slice of a [`ParamVector`] belonging to one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlice {
    pub layer_id: usize,
    pub offset: usize,
    pub len: usize,
}

impl LayerSlice {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Flat model parameters with a layer index map.
///
/// Also used for adapted parameters and for gradients, which share the
/// layout of the parameters they differentiate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    layers: Vec<LayerSlice>,
    shape: Vec<usize>,
}

impl ParamVector {
    /// Builds a vector after checking the layer map tiles `values` exactly.
    pub fn new(values: Vec<f64>, layers: Vec<LayerSlice>, shape: Vec<usize>) -> Result<Self> {
        let mut cursor = 0;
        for (i, layer) in layers.iter().enumerate() {
            if layer.offset != cursor || layer.layer_id != i {
                return Err(Error::InvalidArgument(format!(
                    "layer map entry {i} starts at {} but previous layer ends at {cursor}",
                    layer.offset
                )));
            }
            cursor += layer.len;
        }
        if cursor != values.len() {
            return Err(Error::dim("layer map total", values.len(), cursor));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite("parameter construction", *v));
        }
        Ok(ParamVector {
            values,
            layers,
            shape,
        })
    }

    /// A single-layer vector, for losses that are not neural networks.
    pub fn flat(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        let layers = vec![LayerSlice {
            layer_id: 0,
            offset: 0,
            len: n,
        }];
        Self::new(values, layers, vec![n])
    }

    /// Zeros with the layout of `self`.
    pub fn zeros_like(&self) -> Self {
        self.with_values(vec![0.0; self.values.len()])
    }

    /// Same layout, new values. Panics on length mismatch.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "layout mismatch");
        ParamVector {
            values,
            layers: self.layers.clone(),
            shape: self.shape.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layers(&self) -> &[LayerSlice] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Layer sizes of the model this vector parameterizes.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn layer(&self, id: usize) -> &[f64] {
        &self.values[self.layers[id].range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Index of the layer that owns parameter `j`.
    pub fn layer_of(&self, j: usize) -> usize {
        self.layers
            .iter()
            .position(|l| l.range().contains(&j))
            .expect("parameter index out of range")
    }

    pub fn check_same_layout(&self, other: &ParamVector, context: &str) -> Result<()> {
        if self.values.len() != other.values.len() {
            return Err(Error::dim(context, self.values.len(), other.values.len()));
        }
        if self.layers != other.layers {
            return Err(Error::InvalidArgument(format!(
                "{context}: layer maps differ"
            )));
        }
        Ok(())
    }

    pub fn dot(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &ParamVector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += k * b;
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
