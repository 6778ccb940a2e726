//! Momentum (exponential moving average) update tying the key network to the
//! query network.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Flat parameter vector for a whole encoder + transform stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    values: Vec<f64>,
}

impl EncoderParams {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("encoder parameters"));
        }
        Ok(EncoderParams { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// theta_k' = m * theta_k + (1 - m) * theta_q, element-wise.
///
/// Each coordinate of the result is a convex combination of the inputs.
pub fn momentum_update(
    theta_q: &EncoderParams,
    theta_k: &EncoderParams,
    m: f64,
) -> Result<EncoderParams> {
    if theta_q.len() != theta_k.len() {
        return Err(CoreError::DimensionMismatch {
            expected: theta_q.len(),
            got: theta_k.len(),
        });
    }
    if !(0.0..=1.0).contains(&m) {
        return Err(CoreError::InvalidArgument(format!(
            "momentum coefficient {m} outside [0, 1]"
        )));
    }
    let values = theta_k
        .as_slice()
        .iter()
        .zip(theta_q.as_slice())
        .map(|(&k, &q)| m * k + (1.0 - m) * q)
        .collect();
    EncoderParams::new(values)
}
