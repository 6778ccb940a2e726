//! Softmax cross-entropy over the class centers acting as a linear layer.

use crate::centers::ClassCenters;
use crate::embedding::Embedding;
use crate::error::{CoreError, Result};
use crate::linalg::{axpy, dot, log_sum_exp, Mat};
use crate::loss::{check_tau, LossResult};

/// -log softmax over { c_k . x / tau } at the true class `y`.
///
/// The sample enters through the identity path, so the gradient lands in
/// `grad_f`; `grad_centers` holds the full d value / d C matrix.
pub fn cross_entropy(
    x: &Embedding,
    centers: &ClassCenters,
    y: usize,
    tau: f64,
) -> Result<LossResult> {
    check_tau(tau)?;
    let n = centers.n_classes();
    let d = centers.dim();
    if y >= n {
        return Err(CoreError::LabelOutOfRange {
            label: y,
            n_classes: n,
        });
    }
    if x.dim() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: x.dim(),
        });
    }

    let logits: Vec<f64> = (0..n)
        .map(|k| dot(centers.center(k), x.as_slice()) / tau)
        .collect();
    let log_z = log_sum_exp(&logits);
    let value = log_z - logits[y];

    let mut grad_f = vec![0.0; d];
    let mut grad_centers = Mat::zeros(n, d);
    for (k, &logit) in logits.iter().enumerate() {
        let coeff = (logit - log_z).exp() - if k == y { 1.0 } else { 0.0 };
        axpy(&mut grad_f, coeff / tau, centers.center(k));
        axpy(grad_centers.row_mut(k), coeff / tau, x.as_slice());
    }

    Ok(LossResult {
        value,
        grad_g: vec![0.0; x.dim()],
        grad_f,
        grad_centers,
    })
}
