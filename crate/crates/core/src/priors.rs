//! Class frequency priors and the expected-positive count K_y.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Strictly positive class frequencies summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPriors {
    q: Vec<f64>,
}

impl ClassPriors {
    pub fn new(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(CoreError::InvalidArgument("priors must be nonempty".into()));
        }
        for (i, &p) in q.iter().enumerate() {
            if !(p > 0.0 && p <= 1.0) || !p.is_finite() {
                return Err(CoreError::InvalidArgument(format!(
                    "prior q({i}) = {p} outside (0, 1]"
                )));
            }
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "priors sum to {sum}, expected 1"
            )));
        }
        Ok(ClassPriors { q })
    }

    pub fn n_classes(&self) -> usize {
        self.q.len()
    }

    pub fn get(&self, y: usize) -> f64 {
        self.q[y]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.q
    }
}

/// q(y) = counts[y] / total. Every class must be observed at least once.
pub fn class_priors_from_counts(counts: &[usize]) -> Result<ClassPriors> {
    if counts.is_empty() {
        return Err(CoreError::InvalidArgument("counts must be nonempty".into()));
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(CoreError::ZeroClassCount(i));
    }
    let total: usize = counts.iter().sum();
    let q: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    // Renormalize away the last-bit drift so the sum-to-one invariant holds exactly.
    let sum: f64 = q.iter().sum();
    ClassPriors::new(q.into_iter().map(|p| p / sum).collect())
}

/// K_y: expected number of same-class positives among `queue_len` queue slots.
/// Linear in both arguments and generally non-integer. The realized count in
/// a finite queue fluctuates around this value; only the expectation enters
/// the optimum statements.
pub fn expected_positives(priors: &ClassPriors, queue_len: usize, y: usize) -> f64 {
    queue_len as f64 * priors.get(y)
}
