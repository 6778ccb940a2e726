//! Decomposition of the parametric loss into its multi-task-plus-extra form.
//!
//! With ExpSum the total mass over the sample block A(i) and the center block
//! C, the unscaled parametric loss splits exactly into
//!
//! ```text
//! L = L_sup + alpha * L_supcon - ( log P_sup + alpha |P| log(1 - P_sup) )
//! ```
//!
//! where L_sup is cross-entropy over the center block alone, L_supcon the
//! unscaled supervised contrast over the sample block alone, and P_sup /
//! P_supcon the complementary block masses of the union softmax.

use crate::centers::ClassCenters;
use crate::embedding::{Embedding, LabeledEmbedding};
use crate::error::{CoreError, Result};
use crate::linalg::{dot, log_add_exp, log_sum_exp};
use crate::loss::{check_alpha, check_tau};

/// The per-term breakdown. `residual` is the absolute gap between the
/// directly evaluated loss and the sum of the reported components.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub l_sup: f64,
    pub l_supcon: f64,
    pub p_sup: f64,
    pub p_supcon: f64,
    pub exp_sum: f64,
    pub l_extra: f64,
    pub residual: f64,
}

/// Break a parametric-loss instance into cross-entropy, contrast, and extra
/// terms. Defined on the unscaled loss by default; `unscaled = false` divides
/// every component uniformly by the weight sum 1 + alpha |P|.
#[allow(clippy::too_many_arguments)]
pub fn decompose_paco(
    g_i: &Embedding,
    f_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    alpha: f64,
    tau: f64,
    unscaled: bool,
) -> Result<Decomposition> {
    check_alpha(alpha)?;
    check_tau(tau)?;
    if a_set.is_empty() || p_set.is_empty() {
        return Err(CoreError::EmptyDecomposition);
    }
    let n = centers.n_classes();
    if y >= n {
        return Err(CoreError::LabelOutOfRange {
            label: y,
            n_classes: n,
        });
    }
    if f_i.dim() != centers.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: centers.dim(),
            got: f_i.dim(),
        });
    }

    let slogits: Vec<f64> = a_set
        .iter()
        .map(|m| {
            if m.embedding.dim() != g_i.dim() {
                Err(CoreError::DimensionMismatch {
                    expected: g_i.dim(),
                    got: m.embedding.dim(),
                })
            } else {
                Ok(dot(m.embedding.as_slice(), g_i.as_slice()) / tau)
            }
        })
        .collect::<Result<_>>()?;
    let clogits: Vec<f64> = (0..n)
        .map(|k| dot(centers.center(k), f_i.as_slice()) / tau)
        .collect();

    let log_sa = log_sum_exp(&slogits);
    let log_sc = log_sum_exp(&clogits);
    let log_z = log_add_exp(log_sa, log_sc);

    let p_sup = (log_sc - log_z).exp();
    let p_supcon = (log_sa - log_z).exp();

    // Component route: per-block softmaxes.
    let l_sup = log_sc - clogits[y];
    let mut l_supcon = 0.0;
    for p in p_set {
        let s = dot(p.embedding.as_slice(), g_i.as_slice()) / tau;
        l_supcon += log_sa - s;
    }
    let k = p_set.len() as f64;
    let l_extra = -(log_sc - log_z) - alpha * k * (log_sa - log_z);

    // Direct route: every term normalized by the union mass.
    let mut full = log_z - clogits[y];
    for p in p_set {
        let s = dot(p.embedding.as_slice(), g_i.as_slice()) / tau;
        full += alpha * (log_z - s);
    }

    let scale = if unscaled { 1.0 } else { 1.0 + alpha * k };
    let l_sup = l_sup / scale;
    let l_supcon = l_supcon / scale;
    let l_extra = l_extra / scale;
    let full = full / scale;
    let residual = (full - (l_sup + alpha * l_supcon + l_extra)).abs();

    Ok(Decomposition {
        l_sup,
        l_supcon,
        p_sup,
        p_supcon,
        exp_sum: log_z.exp(),
        l_extra,
        residual,
    })
}
