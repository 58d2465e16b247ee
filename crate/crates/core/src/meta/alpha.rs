use serde::{Deserialize, Serialize};

use crate::diffcore::ParamVector;
use crate::error::{Error, Result};

/// Resolution at which the learner learning rate is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Scalar,
    PerLayer,
    PerParameter,
}

/// Learner (inner-step) learning rate α.
///
/// Holds one value for `Scalar`, one per layer of the parameter layout for
/// `PerLayer`, and one per parameter for `PerParameter`. Values never drop
/// below `floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    granularity: Granularity,
    values: Vec<f64>,
    floor: f64,
}

impl AlphaParams {
    pub fn new(granularity: Granularity, values: Vec<f64>, floor: f64) -> Result<Self> {
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha floor must be finite and >= 0, got {floor}"
            )));
        }
        if values.is_empty() || (granularity == Granularity::Scalar && values.len() != 1) {
            return Err(Error::dim("alpha values", 1, values.len()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::non_finite("alpha construction", *v));
        }
        if let Some(v) = values.iter().find(|&&v| v < floor) {
            return Err(Error::InvalidArgument(format!(
                "alpha value {v} is below the floor {floor}"
            )));
        }
        Ok(AlphaParams {
            granularity,
            values,
            floor,
        })
    }

    /// Scalar α with a zero floor.
    pub fn scalar(value: f64) -> Self {
        Self::new(Granularity::Scalar, vec![value], 0.0).expect("valid scalar alpha")
    }

    /// α filled with `value` at the given granularity, sized for `layout`.
    pub fn filled(
        granularity: Granularity,
        value: f64,
        layout: &ParamVector,
        floor: f64,
    ) -> Result<Self> {
        let n = Self::expected_len(granularity, layout);
        Self::new(granularity, vec![value; n], floor)
    }

    pub fn expected_len(granularity: Granularity, layout: &ParamVector) -> usize {
        match granularity {
            Granularity::Scalar => 1,
            Granularity::PerLayer => layout.num_layers(),
            Granularity::PerParameter => layout.len(),
        }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn check_layout(&self, layout: &ParamVector) -> Result<()> {
        let expected = Self::expected_len(self.granularity, layout);
        if self.values.len() != expected {
            return Err(Error::dim("alpha granularity", expected, self.values.len()));
        }
        Ok(())
    }

    /// One α per parameter of `layout`.
    pub fn expand(&self, layout: &ParamVector) -> Result<Vec<f64>> {
        self.check_layout(layout)?;
        Ok(match self.granularity {
            Granularity::Scalar => vec![self.values[0]; layout.len()],
            Granularity::PerParameter => self.values.clone(),
            Granularity::PerLayer => {
                let mut out = vec![0.0; layout.len()];
                for (slice, &a) in layout.layers().iter().zip(&self.values) {
                    out[slice.range()].fill(a);
                }
                out
            }
        })
    }

    /// Returns a copy with new values, clamped at the floor.
    /// The second element counts components that hit the floor.
    pub fn with_values_clamped(&self, values: Vec<f64>) -> (Self, usize) {
        assert_eq!(values.len(), self.values.len());
        let mut clamped = 0;
        let values = values
            .into_iter()
            .map(|v| {
                if v < self.floor || v.is_nan() {
                    clamped += 1;
                    self.floor
                } else {
                    v
                }
            })
            .collect();
        (
            AlphaParams {
                granularity: self.granularity,
                values,
                floor: self.floor,
            },
            clamped,
        )
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
