//! Post-training probes: per-class classifier gradient norms (the
//! rebalancing diagnostic) and the two-stage linear evaluation protocol for
//! representation-only methods.

use gpaco_core::linalg::norm2;
use gpaco_core::loss::{cross_entropy, paco_loss_indexed, LossVariant, PacoInputs};
use gpaco_core::{ClassCenters, LabeledEmbedding, Mat};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, TrainerError};
use crate::eval::{evaluate_features, Metrics};
use crate::rng::uniform_sym;
use crate::train::{cosine_lr, SavedState};

/// Per-class mean L2 norm of the loss gradient on that class's center row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGradNorm {
    pub class: usize,
    pub count: usize,
    pub norm: f64,
}

/// For every sample, take the gradient of the state's training loss with
/// respect to each center row, and average the per-sample row norms over the
/// data. Contrast members come from the state's final queue; the variants
/// that never train centers (supcon, info_nce) are probed through the
/// cross-entropy loss their second-stage classifier would see. Rows are
/// returned sorted by descending training count.
pub fn classifier_grad_norm_probe(state: &SavedState, data: &Dataset) -> Result<Vec<ClassGradNorm>> {
    if data.is_empty() {
        return Err(TrainerError::Shape("probe data must be nonempty".into()));
    }
    let n = state.centers.n_classes();
    let variant = state.config.loss.variant;
    let tau = state.config.loss.tau;
    // The cross-entropy probes run at the center-branch temperature.
    let rebalance = variant == LossVariant::PacoRebalanced || state.config.loss.center_rebalance;
    let offsets: Option<Vec<f64>> = if rebalance {
        let total: usize = state.counts.iter().sum();
        Some(
            state
                .counts
                .iter()
                .map(|&c| (c as f64 / total as f64).ln())
                .collect(),
        )
    } else {
        None
    };
    let queue_members: Vec<&LabeledEmbedding> = state.queue.entries().collect();

    let mut sums = vec![0.0f64; n];
    for (x, &y) in data.x.iter().zip(&data.y) {
        let cache = state.query.encode(x)?;
        let grad_centers: Mat = match variant {
            LossVariant::Paco | LossVariant::Gpaco | LossVariant::PacoRebalanced => {
                let positives: Vec<usize> = queue_members
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m.label == y)
                    .map(|(j, _)| j)
                    .collect();
                paco_loss_indexed(&PacoInputs {
                    g: &cache.g_embedding(),
                    f: &cache.f_embedding(),
                    members: &queue_members,
                    positive_idx: &positives,
                    centers: &state.centers,
                    y,
                    alpha: state.config.loss.alpha,
                    tau,
                    center_tau: state.config.loss.center_tau(),
                    center_logit_offsets: offsets.as_deref(),
                })
                .map_err(TrainerError::Core)?
                .result
                .grad_centers
            }
            // Cross-entropy trains these classifiers (directly, as the
            // second stage, or as the center half of multi-task).
            LossVariant::CrossEntropy
            | LossVariant::Supcon
            | LossVariant::InfoNce
            | LossVariant::MultiTask => {
                cross_entropy(&cache.f_embedding(), &state.centers, y, state.config.loss.center_tau())
                    .map_err(TrainerError::Core)?
                    .grad_centers
            }
        };
        for (k, sum) in sums.iter_mut().enumerate() {
            *sum += norm2(grad_centers.row(k));
        }
    }

    let inv = 1.0 / data.len() as f64;
    let mut rows: Vec<ClassGradNorm> = (0..n)
        .map(|k| ClassGradNorm {
            class: k,
            count: state.counts[k],
            norm: sums[k] * inv,
        })
        .collect();
    rows.sort_by_key(|r| (std::cmp::Reverse(r.count), r.class));
    Ok(rows)
}

/// Max/min ratio of mean gradient norms across frequency deciles (classes
/// bucketed by frequency rank into ten groups).
pub fn decile_ratio(rows: &[ClassGradNorm]) -> f64 {
    let n = rows.len();
    let mut means = Vec::new();
    for dec in 0..10usize {
        let lo = dec * n / 10;
        let hi = (dec + 1) * n / 10;
        if hi > lo {
            let m: f64 = rows[lo..hi].iter().map(|r| r.norm).sum::<f64>() / (hi - lo) as f64;
            means.push(m);
        }
    }
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn default_probe_epochs() -> usize {
    100
}

fn default_probe_batch() -> usize {
    64
}

fn default_probe_lr0() -> f64 {
    0.5
}

/// Second-stage linear classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_epochs")]
    pub epochs: usize,
    #[serde(default = "default_probe_batch")]
    pub batch_size: usize,
    #[serde(default = "default_probe_lr0")]
    pub lr0: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: default_probe_epochs(),
            batch_size: default_probe_batch(),
            lr0: default_probe_lr0(),
            seed: 0,
        }
    }
}

/// Freeze the representation and train fresh centers with cross-entropy;
/// report balanced test metrics and the learned classifier.
pub fn linear_probe(
    state: &SavedState,
    train: &Dataset,
    test: &Dataset,
    cfg: &ProbeConfig,
) -> Result<(Metrics, ClassCenters)> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.lr0 <= 0.0 || cfg.lr0.is_nan() {
        return Err(TrainerError::InvalidConfig(
            "probe needs positive epochs, batch size, and learning rate".into(),
        ));
    }
    let n = state.centers.n_classes();
    let d = state.centers.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let feats: Vec<Vec<f64>> = train
        .x
        .iter()
        .map(|x| Ok(state.query.encode(x)?.f().to_vec()))
        .collect::<Result<_>>()?;
    let test_feats: Vec<Vec<f64>> = test
        .x
        .iter()
        .map(|x| Ok(state.query.encode(x)?.f().to_vec()))
        .collect::<Result<_>>()?;

    let bound = (1.0 / d as f64).sqrt();
    let mut centers = Mat::zeros(n, d);
    for v in centers.data_mut() {
        *v = uniform_sym(&mut rng, bound);
    }
    let mut centers = ClassCenters::new(centers).map_err(TrainerError::Core)?;
    let mut velocity = Mat::zeros(n, d);
    let mu = 0.9;

    let mut indices: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg.lr0, epoch, cfg.epochs);
        indices.shuffle(&mut rng);
        for chunk in indices.chunks(cfg.batch_size) {
            let mut grad = Mat::zeros(n, d);
            let inv = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let e = gpaco_core::Embedding::new(feats[i].clone())
                    .map_err(TrainerError::Core)?;
                let r = cross_entropy(&e, &centers, train.y[i], 1.0)
                    .map_err(TrainerError::Core)?;
                grad.scaled_add(inv, &r.grad_centers);
            }
            velocity.scale(mu);
            velocity.scaled_add(1.0, &grad);
            for (p, v) in centers
                .as_mat_mut()
                .data_mut()
                .iter_mut()
                .zip(velocity.data())
            {
                *p -= lr * v;
            }
        }
    }

    let metrics = evaluate_features(&test_feats, &test.y, &centers, &state.counts)?;
    Ok((metrics, centers))
}
