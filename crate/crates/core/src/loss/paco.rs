//! Parametric contrastive loss: supervised contrast augmented with learnable
//! class centers, plus the balanced-softmax center rebalance and the
//! fixed-weight multi-task combination it generalizes.
//!
//! The candidate set is A(i) united with the centers. Sample logits are
//! z . G(x_i) / tau; center logits are c . F(x_i) / center_tau plus an
//! optional additive log-prior. Positive sample terms carry weight alpha, the
//! own-class center carries weight 1, and the loss is scaled by the total
//! weight 1 + alpha |P(i)|.

use crate::centers::ClassCenters;
use crate::embedding::{Embedding, LabeledEmbedding};
use crate::error::{CoreError, Result};
use crate::linalg::{axpy, dot, log_add_exp, log_sum_exp, Mat};
use crate::loss::{check_alpha, check_tau, cross_entropy, supcon_loss, LossResult, LossWithMembers};
use crate::priors::ClassPriors;

/// Inputs for the positional form of the parametric loss.
pub struct PacoInputs<'a> {
    pub g: &'a Embedding,
    pub f: &'a Embedding,
    pub members: &'a [&'a LabeledEmbedding],
    pub positive_idx: &'a [usize],
    pub centers: &'a ClassCenters,
    pub y: usize,
    pub alpha: f64,
    pub tau: f64,
    /// Temperature divisor on center logits (pass `tau` for the default
    /// behavior, 1.0 to leave center logits untempered).
    pub center_tau: f64,
    /// Additive per-class center-logit offsets, e.g. log priors.
    pub center_logit_offsets: Option<&'a [f64]>,
}

struct CenterBlock<'a> {
    centers: &'a ClassCenters,
    y: usize,
    f: &'a [f64],
    center_tau: f64,
    offsets: Option<&'a [f64]>,
}

fn check_center_block(b: &CenterBlock) -> Result<()> {
    check_tau(b.center_tau)?;
    let n = b.centers.n_classes();
    if b.y >= n {
        return Err(CoreError::LabelOutOfRange {
            label: b.y,
            n_classes: n,
        });
    }
    if b.f.len() != b.centers.dim() {
        return Err(CoreError::DimensionMismatch {
            expected: b.centers.dim(),
            got: b.f.len(),
        });
    }
    if let Some(off) = b.offsets {
        if off.len() != n {
            return Err(CoreError::DimensionMismatch {
                expected: n,
                got: off.len(),
            });
        }
        if off.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("center logit offsets"));
        }
    }
    Ok(())
}

fn sample_logits(g: &[f64], members: &[&LabeledEmbedding], tau: f64) -> Result<Vec<f64>> {
    members
        .iter()
        .map(|m| {
            if m.embedding.dim() != g.len() {
                Err(CoreError::DimensionMismatch {
                    expected: g.len(),
                    got: m.embedding.dim(),
                })
            } else {
                Ok(dot(m.embedding.as_slice(), g) / tau)
            }
        })
        .collect()
}

fn center_logits(b: &CenterBlock) -> Vec<f64> {
    (0..b.centers.n_classes())
        .map(|k| {
            let base = dot(b.centers.center(k), b.f) / b.center_tau;
            base + b.offsets.map_or(0.0, |o| o[k])
        })
        .collect()
}

/// Shared core. `center` is always present for the public operations; the
/// sample-only path exists to expose the pure contrast block for analysis.
fn paco_core(
    g: &Embedding,
    members: &[&LabeledEmbedding],
    positive_idx: &[usize],
    center: Option<&CenterBlock>,
    alpha: f64,
    tau: f64,
) -> Result<LossWithMembers> {
    check_alpha(alpha)?;
    check_tau(tau)?;
    for &p in positive_idx {
        if p >= members.len() {
            return Err(CoreError::InvalidArgument(format!(
                "positive index {p} out of range for {} members",
                members.len()
            )));
        }
    }
    if let Some(b) = center {
        check_center_block(b)?;
    }

    let d = g.dim();
    let slogits = sample_logits(g.as_slice(), members, tau)?;
    let clogits = center.map(center_logits);
    let log_sa = log_sum_exp(&slogits);
    let log_z = match &clogits {
        Some(cl) => log_add_exp(log_sa, log_sum_exp(cl)),
        None => log_sa,
    };
    if log_z == f64::NEG_INFINITY {
        return Err(CoreError::EmptyContrastSet);
    }

    let n_pos = positive_idx.len() as f64;
    let scale = 1.0 + alpha * n_pos;
    // Total weight multiplying the log-denominator: the center term is absent
    // on the sample-only path.
    let log_z_weight = if center.is_some() { scale } else { alpha * n_pos };

    let mut pos_count = vec![0usize; members.len()];
    for &p in positive_idx {
        pos_count[p] += 1;
    }

    let mut value = 0.0;
    for &p in positive_idx {
        value += alpha * (log_z - slogits[p]);
    }

    let mut grad_g = vec![0.0; d];
    let mut member_grads = Vec::with_capacity(members.len());
    for (j, m) in members.iter().enumerate() {
        // scaled d value / d sample-logit_j
        let sm = (slogits[j] - log_z).exp();
        let dl = (log_z_weight * sm - alpha * pos_count[j] as f64) / scale;
        axpy(&mut grad_g, dl / tau, m.embedding.as_slice());
        let mut mg = vec![0.0; d];
        axpy(&mut mg, dl / tau, g.as_slice());
        member_grads.push(mg);
    }

    let (grad_f, grad_centers) = match (center, &clogits) {
        (Some(b), Some(cl)) => {
            value += log_z - cl[b.y];
            let n = b.centers.n_classes();
            let mut grad_f = vec![0.0; b.f.len()];
            let mut grad_centers = Mat::zeros(n, b.f.len());
            for (k, &logit) in cl.iter().enumerate() {
                // scaled d value / d center-logit_k
                let dl = (logit - log_z).exp() - if k == b.y { 1.0 / scale } else { 0.0 };
                axpy(&mut grad_f, dl / b.center_tau, b.centers.center(k));
                axpy(grad_centers.row_mut(k), dl / b.center_tau, b.f);
            }
            (grad_f, grad_centers)
        }
        _ => (vec![0.0; d], Mat::zeros(0, 0)),
    };

    Ok(LossWithMembers {
        result: LossResult {
            value: value / scale,
            grad_g,
            grad_f,
            grad_centers,
        },
        member_grads,
    })
}

/// Face-value form: positives are supplied as their own list and enter the
/// numerators directly; the denominator runs over `a_set` united with the
/// centers. A(i) may be empty (queue cold start), in which case the loss
/// reduces exactly to [`cross_entropy`] over the centers.
#[allow(clippy::too_many_arguments)]
pub fn paco_loss(
    g_i: &Embedding,
    f_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    alpha: f64,
    tau: f64,
) -> Result<LossResult> {
    paco_listed(g_i, f_i, a_set, p_set, centers, y, alpha, tau, tau, None)
}

/// [`paco_loss`] with explicit additive center-logit offsets.
#[allow(clippy::too_many_arguments)]
pub fn paco_loss_with_center_offsets(
    g_i: &Embedding,
    f_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    alpha: f64,
    tau: f64,
    offsets: &[f64],
) -> Result<LossResult> {
    paco_listed(
        g_i,
        f_i,
        a_set,
        p_set,
        centers,
        y,
        alpha,
        tau,
        tau,
        Some(offsets),
    )
}

/// Center-rebalanced parametric loss: every center logit gains log q(y_k).
#[allow(clippy::too_many_arguments)]
pub fn paco_rebalanced_loss(
    g_i: &Embedding,
    f_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    alpha: f64,
    tau: f64,
    priors: &ClassPriors,
) -> Result<LossResult> {
    if priors.n_classes() != centers.n_classes() {
        return Err(CoreError::DimensionMismatch {
            expected: centers.n_classes(),
            got: priors.n_classes(),
        });
    }
    let offsets: Vec<f64> = priors.as_slice().iter().map(|q| q.ln()).collect();
    paco_listed(
        g_i,
        f_i,
        a_set,
        p_set,
        centers,
        y,
        alpha,
        tau,
        tau,
        Some(&offsets),
    )
}

#[allow(clippy::too_many_arguments)]
fn paco_listed(
    g_i: &Embedding,
    f_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    alpha: f64,
    tau: f64,
    center_tau: f64,
    offsets: Option<&[f64]>,
) -> Result<LossResult> {
    let refs: Vec<&LabeledEmbedding> = a_set.iter().collect();
    let block = CenterBlock {
        centers,
        y,
        f: f_i.as_slice(),
        center_tau,
        offsets,
    };
    // Denominator and member gradients from the core with no positives...
    let mut out = paco_core(g_i, &refs, &[], Some(&block), alpha, tau)?;
    if p_set.is_empty() {
        return Ok(out.result);
    }

    // ...then fold the listed positives into value and gradients. The core
    // was evaluated with scale 1 (no positives), so rescale its pieces.
    let scale = 1.0 + alpha * p_set.len() as f64;
    let slogits = sample_logits(g_i.as_slice(), &refs, tau)?;
    let clogits = center_logits(&block);
    let log_z = log_add_exp(log_sum_exp(&slogits), log_sum_exp(&clogits));

    let mut value = out.result.value; // center term at scale 1
    for p in p_set {
        if p.embedding.dim() != g_i.dim() {
            return Err(CoreError::DimensionMismatch {
                expected: g_i.dim(),
                got: p.embedding.dim(),
            });
        }
        let s = dot(p.embedding.as_slice(), g_i.as_slice()) / tau;
        value += alpha * (log_z - s);
    }
    value /= scale;

    // Denominator softmax pulls stay as computed (they are scale-free); the
    // delta on the true center shrinks from 1 to 1/scale, and each listed
    // positive contributes -alpha/scale of its own embedding to grad_g.
    let mut grad_g = out.result.grad_g;
    for p in p_set {
        axpy(&mut grad_g, -alpha / (scale * tau), p.embedding.as_slice());
    }
    let delta_fix = 1.0 - 1.0 / scale; // restore, then apply the scaled delta
    axpy(
        &mut out.result.grad_f,
        delta_fix / center_tau,
        centers.center(y),
    );
    axpy(
        out.result.grad_centers.row_mut(y),
        delta_fix / center_tau,
        f_i.as_slice(),
    );

    Ok(LossResult {
        value,
        grad_g,
        grad_f: out.result.grad_f,
        grad_centers: out.result.grad_centers,
    })
}

/// Positional form with member gradients, for training loops.
pub fn paco_loss_indexed(inputs: &PacoInputs) -> Result<LossWithMembers> {
    let block = CenterBlock {
        centers: inputs.centers,
        y: inputs.y,
        f: inputs.f.as_slice(),
        center_tau: inputs.center_tau,
        offsets: inputs.center_logit_offsets,
    };
    paco_core(
        inputs.g,
        inputs.members,
        inputs.positive_idx,
        Some(&block),
        inputs.alpha,
        inputs.tau,
    )
}

/// Fixed-weight combination of cross-entropy and supervised contrast.
#[allow(clippy::too_many_arguments)]
pub fn multi_task_loss(
    x: &Embedding,
    g_i: &Embedding,
    a_set: &[LabeledEmbedding],
    p_set: &[LabeledEmbedding],
    centers: &ClassCenters,
    y: usize,
    tau: f64,
    weight: f64,
) -> Result<LossResult> {
    if weight < 0.0 || !weight.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "multi-task weight {weight} must be nonnegative"
        )));
    }
    let ce = cross_entropy(x, centers, y, tau)?;
    let sc = supcon_loss(g_i, a_set, p_set, tau)?;
    let mut grad_g = sc.grad_g;
    for v in &mut grad_g {
        *v *= weight;
    }
    Ok(LossResult {
        value: ce.value + weight * sc.value,
        grad_g,
        grad_f: ce.grad_f,
        grad_centers: ce.grad_centers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn le(v: &[f64], label: usize) -> LabeledEmbedding {
        LabeledEmbedding::new(emb(v), label)
    }

    fn centers_of(rows: Vec<Vec<f64>>) -> ClassCenters {
        ClassCenters::new(Mat::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn cold_start_reduces_to_cross_entropy() {
        let c = centers_of(vec![vec![0.4, -0.2], vec![-0.9, 0.3], vec![0.1, 0.8]]);
        let f = emb(&[0.7, 0.25]);
        let g = emb(&[0.0, 0.0]);
        let p = paco_loss(&g, &f, &[], &[], &c, 2, 0.05, 0.2).unwrap();
        let ce = cross_entropy(&f, &c, 2, 0.2).unwrap();
        assert!((p.value - ce.value).abs() < 1e-15);
        for (a, b) in p.grad_f.iter().zip(&ce.grad_f) {
            assert!((a - b).abs() < 1e-15);
        }
        for k in 0..3 {
            for (a, b) in p.grad_centers.row(k).iter().zip(ce.grad_centers.row(k)) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn uniform_logits_give_ln_m_plus_n() {
        // Anchor orthogonal to all members and f orthogonal to all centers:
        // every logit is zero, so the softmax is uniform over M + n slots and
        // the weights cancel.
        let m = 7;
        let n = 3;
        let g = emb(&[0.0, 1.0]);
        let f = emb(&[0.0, 2.0]);
        let a: Vec<_> = (0..m).map(|j| le(&[j as f64 + 1.0, 0.0], j % 2)).collect();
        let p: Vec<_> = a.iter().take(2).cloned().collect();
        let c = centers_of(vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]]);
        let r = paco_loss(&g, &f, &a, &p, &c, 1, 0.05, 1.0).unwrap();
        assert!((r.value - ((m + n) as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn indexed_matches_listed() {
        let g = emb(&[0.3, -0.6]);
        let f = emb(&[0.9, 0.1]);
        let a = vec![
            le(&[0.2, 0.5], 0),
            le(&[-0.4, 0.8], 1),
            le(&[0.6, -0.1], 0),
        ];
        let p: Vec<_> = a.iter().filter(|m| m.label == 0).cloned().collect();
        let c = centers_of(vec![vec![0.5, 0.4], vec![-0.2, 0.7]]);
        let listed = paco_loss(&g, &f, &a, &p, &c, 0, 0.05, 0.2).unwrap();
        let refs: Vec<&LabeledEmbedding> = a.iter().collect();
        let indexed = paco_loss_indexed(&PacoInputs {
            g: &g,
            f: &f,
            members: &refs,
            positive_idx: &[0, 2],
            centers: &c,
            y: 0,
            alpha: 0.05,
            tau: 0.2,
            center_tau: 0.2,
            center_logit_offsets: None,
        })
        .unwrap();
        assert!((listed.value - indexed.result.value).abs() < 1e-12);
        for (x, y) in listed.grad_g.iter().zip(&indexed.result.grad_g) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in listed.grad_f.iter().zip(&indexed.result.grad_f) {
            assert!((x - y).abs() < 1e-12);
        }
        for k in 0..2 {
            for (x, y) in listed
                .grad_centers
                .row(k)
                .iter()
                .zip(indexed.result.grad_centers.row(k))
            {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_offsets_equal_plain_paco() {
        // Degenerate all-ones "priors" have zero log offsets, so the
        // rebalanced form collapses to the plain loss.
        let g = emb(&[0.3, -0.6]);
        let f = emb(&[0.9, 0.1]);
        let a = vec![le(&[0.2, 0.5], 0), le(&[-0.4, 0.8], 1)];
        let p = vec![a[0].clone()];
        let c = centers_of(vec![vec![0.5, 0.4], vec![-0.2, 0.7]]);
        let plain = paco_loss(&g, &f, &a, &p, &c, 0, 0.05, 0.2).unwrap();
        let offset =
            paco_loss_with_center_offsets(&g, &f, &a, &p, &c, 0, 0.05, 0.2, &[0.0, 0.0]).unwrap();
        assert_eq!(plain.value, offset.value);
        assert_eq!(plain.grad_g, offset.grad_g);
    }

    #[test]
    fn uniform_priors_shift_center_logits_by_minus_ln_n() {
        let g = emb(&[0.3, -0.6]);
        let f = emb(&[0.9, 0.1]);
        let a = vec![le(&[0.2, 0.5], 0), le(&[-0.4, 0.8], 1)];
        let p = vec![a[0].clone()];
        let c = centers_of(vec![vec![0.5, 0.4], vec![-0.2, 0.7]]);
        let priors = ClassPriors::new(vec![0.5, 0.5]).unwrap();
        let reb = paco_rebalanced_loss(&g, &f, &a, &p, &c, 0, 0.05, 0.2, &priors).unwrap();
        let shift = (0.5f64).ln();
        let shifted =
            paco_loss_with_center_offsets(&g, &f, &a, &p, &c, 0, 0.05, 0.2, &[shift, shift])
                .unwrap();
        assert_eq!(reb.value, shifted.value);
        assert_eq!(reb.grad_g, shifted.grad_g);
        assert_eq!(reb.grad_f, shifted.grad_f);
    }

    #[test]
    fn rebalanced_two_class_example() {
        // Empty contrast sets, equal center logits: the loss is the balanced
        // softmax -log(0.9 / (0.9 + 0.1)).
        let c = centers_of(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
        let f = emb(&[0.0, 1.0]); // orthogonal: both base logits zero
        let g = emb(&[0.0, 0.0]);
        let priors = ClassPriors::new(vec![0.9, 0.1]).unwrap();
        let r = paco_rebalanced_loss(&g, &f, &[], &[], &c, 0, 0.05, 1.0, &priors).unwrap();
        assert!((r.value - 0.10536051565782628).abs() < 1e-12);
    }

    #[test]
    fn sample_only_block_is_proportional_to_supcon() {
        // With the centers removed from the candidate set, the parametric
        // loss is alpha |P| / (1 + alpha |P|) times the supervised loss.
        let g = emb(&[0.3, -0.8, 0.5]);
        let a = vec![
            le(&[0.1, 0.2, -0.4], 0),
            le(&[-0.6, 0.9, 0.0], 1),
            le(&[0.7, 0.7, 0.7], 0),
            le(&[0.0, -1.0, 0.3], 2),
        ];
        let refs: Vec<&LabeledEmbedding> = a.iter().collect();
        let pos = vec![0usize, 2];
        let p_list: Vec<_> = pos.iter().map(|&i| a[i].clone()).collect();
        for alpha in [0.05, 0.5, 0.99] {
            let bare = paco_core(&g, &refs, &pos, None, alpha, 0.2).unwrap();
            let sup = supcon_loss(&g, &a, &p_list, 0.2).unwrap();
            let ratio = alpha * pos.len() as f64 / (1.0 + alpha * pos.len() as f64);
            assert!(
                (bare.result.value - ratio * sup.value).abs() < 1e-12,
                "alpha = {alpha}"
            );
            for (x, y) in bare.result.grad_g.iter().zip(&sup.grad_g) {
                assert!((x - ratio * y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn multi_task_weight_zero_is_cross_entropy() {
        let c = centers_of(vec![vec![0.5, 0.4], vec![-0.2, 0.7]]);
        let x = emb(&[0.9, 0.1]);
        let g = emb(&[0.3, -0.6]);
        let a = vec![le(&[0.2, 0.5], 0)];
        let p = vec![a[0].clone()];
        let mt = multi_task_loss(&x, &g, &a, &p, &c, 0, 0.5, 0.0).unwrap();
        let ce = cross_entropy(&x, &c, 0, 0.5).unwrap();
        assert_eq!(mt.value, ce.value);
        assert!(mt.grad_g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn multi_task_empty_positives_is_cross_entropy() {
        let c = centers_of(vec![vec![0.5, 0.4], vec![-0.2, 0.7]]);
        let x = emb(&[0.9, 0.1]);
        let g = emb(&[0.3, -0.6]);
        let a = vec![le(&[0.2, 0.5], 1)];
        let mt = multi_task_loss(&x, &g, &a, &[], &c, 0, 0.5, 1.0).unwrap();
        let ce = cross_entropy(&x, &c, 0, 0.5).unwrap();
        assert_eq!(mt.value, ce.value);
    }

    #[test]
    fn multi_task_combines_values() {
        let c = centers_of(vec![vec![2.0], vec![0.0]]);
        let x = emb(&[1.0]);
        let g = emb(&[1.0]);
        let a = vec![le(&[1.0], 0), le(&[-1.0], 1)];
        let p = vec![a[0].clone()];
        let ce = cross_entropy(&x, &c, 0, 1.0).unwrap();
        let sc = supcon_loss(&g, &a, &p, 1.0).unwrap();
        let mt = multi_task_loss(&x, &g, &a, &p, &c, 0, 1.0, 0.5).unwrap();
        assert!((mt.value - (ce.value + 0.5 * sc.value)).abs() < 1e-15);
    }
}
