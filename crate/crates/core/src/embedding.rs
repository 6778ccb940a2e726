//! Embeddings, labeled embeddings, and the two-view contrast batch.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::norm2;

/// A point in feature space. Entries are always finite; unit norm is
/// guaranteed only when produced by [`l2_normalize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("embedding"));
        }
        Ok(Embedding { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Scale `v` to unit Euclidean norm, preserving direction.
pub fn l2_normalize(v: &[f64]) -> Result<Embedding> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::NonFinite("l2_normalize input"));
    }
    let n = norm2(v);
    if n == 0.0 {
        return Err(CoreError::DegenerateFeature);
    }
    Embedding::new(v.iter().map(|x| x / n).collect())
}

/// Embedding paired with its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEmbedding {
    pub embedding: Embedding,
    pub label: usize,
}

impl LabeledEmbedding {
    pub fn new(embedding: Embedding, label: usize) -> Self {
        LabeledEmbedding { embedding, label }
    }
}

/// Two index-aligned augmented views of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastBatch {
    z_v1: Vec<LabeledEmbedding>,
    z_v2: Vec<LabeledEmbedding>,
}

impl ContrastBatch {
    /// Views must have equal length and position-wise identical labels.
    pub fn new(z_v1: Vec<LabeledEmbedding>, z_v2: Vec<LabeledEmbedding>) -> Result<Self> {
        if z_v1.len() != z_v2.len() {
            return Err(CoreError::DimensionMismatch {
                expected: z_v1.len(),
                got: z_v2.len(),
            });
        }
        for (a, b) in z_v1.iter().zip(&z_v2) {
            if a.label != b.label {
                return Err(CoreError::InvalidArgument(
                    "contrast batch views must carry position-wise identical labels".into(),
                ));
            }
        }
        Ok(ContrastBatch { z_v1, z_v2 })
    }

    pub fn len(&self) -> usize {
        self.z_v1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_v1.is_empty()
    }

    pub fn view1(&self) -> &[LabeledEmbedding] {
        &self.z_v1
    }

    pub fn view2(&self) -> &[LabeledEmbedding] {
        &self.z_v2
    }
}
