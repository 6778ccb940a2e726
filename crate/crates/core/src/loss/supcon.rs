//! Supervised contrastive loss in the momentum-queue frame.

use crate::embedding::{Embedding, LabeledEmbedding};
use crate::error::{CoreError, Result};
use crate::linalg::{axpy, dot, log_sum_exp, Mat};
use crate::loss::{check_tau, LossResult, LossWithMembers};

fn check_member_dims(d: usize, members: &[&LabeledEmbedding]) -> Result<()> {
    for m in members {
        if m.embedding.dim() != d {
            return Err(CoreError::DimensionMismatch {
                expected: d,
                got: m.embedding.dim(),
            });
        }
    }
    Ok(())
}

/// Mean over positives of -log( exp(z+ . g / tau) / sum_A exp(z . g / tau) ).
///
/// An empty P(i) contributes zero loss and zero gradient; an empty A(i) is an
/// error. The positives are taken at face value: their logits enter the
/// numerators while the denominator runs over `a_set` alone.
pub fn supcon_loss(
    g_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    tau: f64,
) -> Result<LossResult> {
    check_tau(tau)?;
    if a_set.is_empty() {
        return Err(CoreError::EmptyContrastSet);
    }
    let d = g_i.dim();
    let refs: Vec<&LabeledEmbedding> = a_set.iter().collect();
    check_member_dims(d, &refs)?;
    let prefs: Vec<&LabeledEmbedding> = p_set.iter().collect();
    check_member_dims(d, &prefs)?;

    if p_set.is_empty() {
        return Ok(LossResult::zeros(d, 0, 0));
    }

    let logits: Vec<f64> = a_set
        .iter()
        .map(|m| dot(m.embedding.as_slice(), g_i.as_slice()) / tau)
        .collect();
    let log_z = log_sum_exp(&logits);
    let inv_p = 1.0 / p_set.len() as f64;

    let mut value = 0.0;
    let mut grad_g = vec![0.0; d];
    for p in p_set {
        let s = dot(p.embedding.as_slice(), g_i.as_slice()) / tau;
        value += inv_p * (log_z - s);
        axpy(&mut grad_g, -inv_p / tau, p.embedding.as_slice());
    }
    for (j, m) in a_set.iter().enumerate() {
        let sm = (logits[j] - log_z).exp();
        axpy(&mut grad_g, sm / tau, m.embedding.as_slice());
    }

    Ok(LossResult {
        value,
        grad_g,
        grad_f: vec![0.0; d],
        grad_centers: Mat::zeros(0, 0),
    })
}

/// Positional form used by the trainer: positives are indices into `members`,
/// and the gradient flowing into every member is returned alongside.
pub fn supcon_loss_indexed(
    g_i: &Embedding,
    members: &[&LabeledEmbedding],
    positive_idx: &[usize],
    tau: f64,
) -> Result<LossWithMembers> {
    check_tau(tau)?;
    if members.is_empty() {
        return Err(CoreError::EmptyContrastSet);
    }
    let d = g_i.dim();
    check_member_dims(d, members)?;
    for &p in positive_idx {
        if p >= members.len() {
            return Err(CoreError::InvalidArgument(format!(
                "positive index {p} out of range for {} members",
                members.len()
            )));
        }
    }

    if positive_idx.is_empty() {
        return Ok(LossWithMembers {
            result: LossResult::zeros(d, 0, 0),
            member_grads: vec![vec![0.0; d]; members.len()],
        });
    }

    let logits: Vec<f64> = members
        .iter()
        .map(|m| dot(m.embedding.as_slice(), g_i.as_slice()) / tau)
        .collect();
    let log_z = log_sum_exp(&logits);
    let inv_p = 1.0 / positive_idx.len() as f64;

    let mut pos_count = vec![0usize; members.len()];
    let mut value = 0.0;
    for &p in positive_idx {
        value += inv_p * (log_z - logits[p]);
        pos_count[p] += 1;
    }

    let mut grad_g = vec![0.0; d];
    let mut member_grads = Vec::with_capacity(members.len());
    for (j, m) in members.iter().enumerate() {
        // d value / d logit_j
        let dl = (logits[j] - log_z).exp() - inv_p * pos_count[j] as f64;
        axpy(&mut grad_g, dl / tau, m.embedding.as_slice());
        let mut mg = vec![0.0; d];
        axpy(&mut mg, dl / tau, g_i.as_slice());
        member_grads.push(mg);
    }

    Ok(LossWithMembers {
        result: LossResult {
            value,
            grad_g,
            grad_f: vec![0.0; d],
            grad_centers: Mat::zeros(0, 0),
        },
        member_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn le(v: &[f64], label: usize) -> LabeledEmbedding {
        LabeledEmbedding::new(Embedding::new(v.to_vec()).unwrap(), label)
    }

    #[test]
    fn equal_similarities_give_ln_m_regardless_of_p() {
        let g = Embedding::new(vec![0.0, 1.0]).unwrap();
        let a: Vec<_> = (0..5).map(|k| le(&[k as f64, 0.0], k % 2)).collect();
        for n_pos in [1usize, 3] {
            let p: Vec<_> = a.iter().take(n_pos).cloned().collect();
            let r = supcon_loss(&g, &a, &p, 0.3).unwrap();
            assert!((r.value - 5.0f64.ln()).abs() < 1e-12, "n_pos = {n_pos}");
        }
    }

    #[test]
    fn empty_positives_collapse_to_zero() {
        let g = Embedding::new(vec![1.0]).unwrap();
        let a = vec![le(&[1.0], 0)];
        let r = supcon_loss(&g, &a, &[], 1.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.grad_g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_positives_one_negative() {
        // Derived: denominator 2e + e^-1, both positives at similarity 1.
        let g = Embedding::new(vec![1.0, 0.0]).unwrap();
        let a = vec![le(&[1.0, 0.0], 0), le(&[1.0, 0.2], 0), le(&[-1.0, 0.0], 1)];
        let p = vec![a[0].clone(), a[1].clone()];
        let r = supcon_loss(&g, &a, &p, 1.0).unwrap();
        assert!((r.value - 0.7586236756795133).abs() < 1e-12);
    }

    #[test]
    fn empty_a_is_an_error() {
        let g = Embedding::new(vec![1.0]).unwrap();
        assert_eq!(
            supcon_loss(&g, &[], &[], 1.0).unwrap_err(),
            CoreError::EmptyContrastSet
        );
    }

    #[test]
    fn indexed_matches_face_value() {
        let g = Embedding::new(vec![0.3, -0.8, 0.5]).unwrap();
        let a = vec![
            le(&[0.1, 0.2, -0.4], 0),
            le(&[-0.6, 0.9, 0.0], 1),
            le(&[0.7, 0.7, 0.7], 0),
            le(&[0.0, -1.0, 0.3], 2),
        ];
        let p: Vec<_> = a.iter().filter(|m| m.label == 0).cloned().collect();
        let face = supcon_loss(&g, &a, &p, 0.2).unwrap();
        let refs: Vec<&LabeledEmbedding> = a.iter().collect();
        let idx = vec![0usize, 2];
        let indexed = supcon_loss_indexed(&g, &refs, &idx, 0.2).unwrap();
        assert!((face.value - indexed.result.value).abs() < 1e-12);
        for (x, y) in face.grad_g.iter().zip(&indexed.result.grad_g) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn member_grads_sum_against_translation() {
        // Translating every member and the anchor by the same logit shift
        // leaves the softmax unchanged; the member gradients must sum to the
        // negative positive-pull so total logit sensitivity cancels.
        let g = Embedding::new(vec![0.4, 0.6]).unwrap();
        let a = [le(&[1.0, 0.0], 0), le(&[0.0, 1.0], 1), le(&[0.5, 0.5], 0)];
        let refs: Vec<&LabeledEmbedding> = a.iter().collect();
        let out = supcon_loss_indexed(&g, &refs, &[0, 2], 0.5).unwrap();
        // Sum over members of d value / d logit_j = 1 - 1 = 0, so the summed
        // member gradient (each dl * g / tau) is the zero vector.
        let mut total = vec![0.0; 2];
        for mg in &out.member_grads {
            axpy(&mut total, 1.0, mg);
        }
        assert!(total.iter().all(|v| v.abs() < 1e-12));
    }
}
