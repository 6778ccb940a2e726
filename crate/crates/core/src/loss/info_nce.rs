//! Non-parametric contrastive loss: one positive key against a set of
//! negatives under a temperature-scaled softmax.

use crate::embedding::Embedding;
use crate::error::{CoreError, Result};
use crate::linalg::{axpy, dot, log_sum_exp, Mat};
use crate::loss::{check_tau, LossResult};

/// -log( exp(q.k+ / tau) / (exp(q.k+ / tau) + sum_neg exp(q.k- / tau)) )
///
/// `grad_g` carries d value / d q; there are no other learnable inputs.
pub fn info_nce(
    q: &Embedding,
    k_plus: &Embedding,
    k_neg: &[Embedding],
    tau: f64,
) -> Result<LossResult> {
    check_tau(tau)?;
    let d = q.dim();
    if k_plus.dim() != d {
        return Err(CoreError::DimensionMismatch {
            expected: d,
            got: k_plus.dim(),
        });
    }
    for k in k_neg {
        if k.dim() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: k.dim(),
            });
        }
    }

    let s_plus = dot(q.as_slice(), k_plus.as_slice()) / tau;
    let mut logits = Vec::with_capacity(1 + k_neg.len());
    logits.push(s_plus);
    logits.extend(k_neg.iter().map(|k| dot(q.as_slice(), k.as_slice()) / tau));
    let log_z = log_sum_exp(&logits);

    let value = log_z - s_plus;

    // d value / d q = sum_j softmax_j * k_j / tau - k_plus / tau
    let mut grad_g = vec![0.0; d];
    axpy(&mut grad_g, ((s_plus - log_z).exp() - 1.0) / tau, k_plus.as_slice());
    for (j, k) in k_neg.iter().enumerate() {
        let p = (logits[j + 1] - log_z).exp();
        axpy(&mut grad_g, p / tau, k.as_slice());
    }

    Ok(LossResult {
        value,
        grad_g,
        grad_f: vec![0.0; d],
        grad_centers: Mat::zeros(0, 0),
    })
}
