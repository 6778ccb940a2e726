//! The desk-scale training loop: two augmented views, query/key encoders,
//! queue maintenance, per-variant loss dispatch with exact gradient routing,
//! and SGD with momentum under a cosine learning-rate schedule.
//!
//! Gradient flow per variant:
//! * the momentum-encoder family (info_nce, supcon, paco, paco_rebalanced,
//!   multi_task) encodes view 2 with the key network, so second-view members
//!   are frozen; within-batch first-view members stay live;
//! * gpaco encodes view 2 with the query network, keeping both in-batch view
//!   blocks live; only queue entries are frozen;
//! * queue pushes always carry detached embeddings.

use gpaco_core::linalg::axpy;
use gpaco_core::loss::{
    cross_entropy, paco_loss_indexed, supcon_loss_indexed, LossConfig, LossVariant, PacoInputs,
};
use gpaco_core::{
    class_priors_from_counts, contrast_member_refs, momentum_update, ClassCenters, ClassPriors,
    FeatureQueue, LabeledEmbedding, Mat,
};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{augment_view, Dataset, SyntheticData};
use crate::encoder::{EncodeCache, EncoderGrads, EncoderNet, EncoderSpec};
use crate::error::{Result, TrainerError};
use crate::eval::{evaluate, Metrics};
use crate::rng::uniform_sym;

fn default_epochs() -> usize {
    200
}

fn default_batch_size() -> usize {
    32
}

fn default_lr0() -> f64 {
    0.1
}

fn default_sgd_momentum() -> f64 {
    0.9
}

fn default_momentum_coeff() -> f64 {
    0.999
}

fn default_queue_capacity() -> usize {
    256
}

fn default_true() -> bool {
    true
}

fn default_aug_noise() -> f64 {
    0.3
}

fn default_aug_jitter() -> f64 {
    0.1
}

/// Desk-scale stand-in for the two-view augmentation pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    #[serde(default = "default_aug_noise")]
    pub noise: f64,
    #[serde(default = "default_aug_jitter")]
    pub scale_jitter: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            noise: default_aug_noise(),
            scale_jitter: default_aug_jitter(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossConfig,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_sgd_momentum")]
    pub sgd_momentum: f64,
    #[serde(default = "default_momentum_coeff")]
    pub momentum_coeff: f64,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity: usize,
    #[serde(default = "default_true")]
    pub two_views: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub augment: AugmentConfig,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss
            .validate()
            .map_err(|e| TrainerError::InvalidConfig(e.to_string()))?;
        if self.epochs == 0 {
            return Err(TrainerError::InvalidConfig("epochs must be positive".into()));
        }
        if self.two_views && self.batch_size < 2 {
            return Err(TrainerError::InvalidConfig(
                "batch_size must be at least 2 for two-view training".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(TrainerError::InvalidConfig(
                "batch_size must be positive".into(),
            ));
        }
        if self.queue_capacity == 0 || !self.queue_capacity.is_multiple_of(self.batch_size) {
            return Err(TrainerError::InvalidConfig(format!(
                "queue_capacity = {} must be a positive multiple of batch_size = {}",
                self.queue_capacity, self.batch_size
            )));
        }
        if self.lr0 <= 0.0 || !self.lr0.is_finite() {
            return Err(TrainerError::InvalidConfig("lr0 must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sgd_momentum) {
            return Err(TrainerError::InvalidConfig(
                "sgd_momentum must lie in [0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.momentum_coeff) {
            return Err(TrainerError::InvalidConfig(
                "momentum_coeff must lie in [0, 1]".into(),
            ));
        }
        if self.augment.noise < 0.0 || self.augment.scale_jitter < 0.0 {
            return Err(TrainerError::InvalidConfig(
                "augmentation strengths must be nonnegative".into(),
            ));
        }
        if self.loss.variant == LossVariant::InfoNce && !self.two_views {
            return Err(TrainerError::InvalidConfig(
                "info_nce needs two views: its positive is the second-view copy".into(),
            ));
        }
        if self.loss.center_rebalance
            && !matches!(
                self.loss.variant,
                LossVariant::Paco | LossVariant::Gpaco | LossVariant::PacoRebalanced
            )
        {
            return Err(TrainerError::InvalidConfig(
                "center_rebalance applies only to the parametric variants".into(),
            ));
        }
        Ok(())
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: crate::data::DatasetSpec,
    #[serde(default)]
    pub encoder: EncoderSpec,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.encoder.validate()?;
        self.train.validate()
    }
}

fn needs_momentum_encoder(variant: LossVariant) -> bool {
    matches!(
        variant,
        LossVariant::InfoNce
            | LossVariant::Supcon
            | LossVariant::Paco
            | LossVariant::PacoRebalanced
            | LossVariant::MultiTask
    )
}

fn uses_queue(variant: LossVariant) -> bool {
    variant != LossVariant::CrossEntropy
}

fn trains_centers(variant: LossVariant) -> bool {
    !matches!(variant, LossVariant::Supcon | LossVariant::InfoNce)
}

/// lr(t) = 0.5 lr0 (1 + cos(pi t / t_max)).
pub fn cosine_lr(lr0: f64, t: usize, t_max: usize) -> f64 {
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * t as f64 / t_max as f64).cos())
}

/// Mutable training state. All randomness flows through the internal ChaCha
/// stream, so whole runs replay bit-for-bit from (config, seed).
#[derive(Clone)]
pub struct TrainState {
    pub config: TrainConfig,
    pub encoder_spec: EncoderSpec,
    pub query: EncoderNet,
    pub key: Option<EncoderNet>,
    pub centers: ClassCenters,
    pub queue: FeatureQueue,
    pub priors: ClassPriors,
    pub counts: Vec<usize>,
    vel_encoder: EncoderGrads,
    vel_centers: Mat,
    rng: ChaCha8Rng,
    pub global_step: usize,
}

/// Serializable snapshot of everything a probe or restart needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedState {
    pub config: TrainConfig,
    pub encoder_spec: EncoderSpec,
    pub query: EncoderNet,
    pub key: Option<EncoderNet>,
    pub centers: ClassCenters,
    pub queue: FeatureQueue,
    pub counts: Vec<usize>,
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub metrics: Metrics,
}

/// Mean batch loss with the gradients it induces and the detached embeddings
/// that would refresh the queue.
#[derive(Debug, Clone)]
pub struct BatchGradients {
    pub loss: f64,
    pub encoder: EncoderGrads,
    pub centers: Mat,
    pub queue_entries: Vec<LabeledEmbedding>,
}

impl TrainState {
    pub fn new(run: &RunConfig, data: &SyntheticData) -> Result<Self> {
        run.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(run.train.seed);
        let query = EncoderNet::new(
            run.dataset.dim,
            &run.encoder,
            run.train.loss.normalize_samples,
            &mut rng,
        );
        let key = needs_momentum_encoder(run.train.loss.variant).then(|| query.clone());
        let d = run.encoder.embed_dim;
        let n = run.dataset.n_classes;
        let bound = (1.0 / d as f64).sqrt();
        let mut centers = Mat::zeros(n, d);
        for v in centers.data_mut() {
            *v = uniform_sym(&mut rng, bound);
        }
        let vel_encoder = EncoderGrads::zeros_like(&query);
        Ok(TrainState {
            config: run.train.clone(),
            encoder_spec: run.encoder.clone(),
            vel_centers: Mat::zeros(n, d),
            vel_encoder,
            centers: ClassCenters::new(centers).map_err(TrainerError::Core)?,
            queue: FeatureQueue::new(run.train.queue_capacity).map_err(TrainerError::Core)?,
            priors: class_priors_from_counts(&data.counts).map_err(TrainerError::Core)?,
            counts: data.counts.clone(),
            query,
            key,
            rng,
            global_step: 0,
        })
    }

    pub fn snapshot(&self) -> SavedState {
        SavedState {
            config: self.config.clone(),
            encoder_spec: self.encoder_spec.clone(),
            query: self.query.clone(),
            key: self.key.clone(),
            centers: self.centers.clone(),
            queue: self.queue.clone(),
            counts: self.counts.clone(),
        }
    }

    /// Log prior offsets when the balanced-softmax center rebalance is active.
    fn center_offsets(&self) -> Option<Vec<f64>> {
        let active = self.config.loss.variant == LossVariant::PacoRebalanced
            || self.config.loss.center_rebalance;
        active.then(|| self.priors.as_slice().iter().map(|q| q.ln()).collect())
    }

    /// One optimizer step over the batch at `idx`. Returns the mean per-anchor
    /// loss.
    pub fn train_step(&mut self, idx: &[usize], data: &Dataset, lr: f64) -> Result<f64> {
        // The key network trails the query network; update it before it
        // produces this step's second-view embeddings.
        if let Some(key) = &mut self.key {
            let merged = momentum_update(
                &self.query.to_params(),
                &key.to_params(),
                self.config.momentum_coeff,
            )
            .map_err(TrainerError::Core)?;
            key.load_params(&merged)?;
        }

        let batch = self.batch_gradients(idx, data)?;
        if !batch.loss.is_finite() {
            return Err(TrainerError::NumericalFailure {
                step: self.global_step,
            });
        }

        self.query.sgd_step(
            &batch.encoder,
            &mut self.vel_encoder,
            lr,
            self.config.sgd_momentum,
        );
        if trains_centers(self.config.loss.variant) {
            let mu = self.config.sgd_momentum;
            self.vel_centers.scale(mu);
            self.vel_centers.scaled_add(1.0, &batch.centers);
            for (p, v) in self
                .centers
                .as_mat_mut()
                .data_mut()
                .iter_mut()
                .zip(self.vel_centers.data())
            {
                *p -= lr * v;
            }
        }
        if uses_queue(self.config.loss.variant) {
            self.queue
                .push(&batch.queue_entries)
                .map_err(TrainerError::Core)?;
        }

        self.global_step += 1;
        Ok(batch.loss)
    }

    /// Forward and backward over one batch without touching parameters, the
    /// queue, or the key network. Consumes augmentation randomness.
    pub fn batch_gradients(&mut self, idx: &[usize], data: &Dataset) -> Result<BatchGradients> {
        let b = idx.len();
        let variant = self.config.loss.variant;
        let tau = self.config.loss.tau;
        let center_tau = self.config.loss.center_tau();
        let alpha = self.config.loss.alpha;
        let two_views = self.config.two_views;
        let momentum_encoder = self.key.is_some();
        let needs_contrast = variant != LossVariant::CrossEntropy;
        let aug = self.config.augment.clone();
        let inv_b = 1.0 / b as f64;
        let offsets = self.center_offsets();

        // Two augmented views per sample, drawn pairwise.
        let mut v1_x: Vec<Vec<f64>> = Vec::with_capacity(b);
        let mut v2_x: Vec<Vec<f64>> = Vec::with_capacity(if two_views { b } else { 0 });
        for &i in idx {
            v1_x.push(augment_view(
                &data.x[i],
                aug.noise,
                aug.scale_jitter,
                &mut self.rng,
            ));
            if two_views {
                v2_x.push(augment_view(
                    &data.x[i],
                    aug.noise,
                    aug.scale_jitter,
                    &mut self.rng,
                ));
            }
        }
        let labels: Vec<usize> = idx.iter().map(|&i| data.y[i]).collect();

        let caches1: Vec<EncodeCache> = v1_x
            .iter()
            .map(|x| self.query.encode(x))
            .collect::<Result<_>>()?;
        if caches1.iter().any(|c| !c.is_finite()) {
            return Err(TrainerError::NumericalFailure {
                step: self.global_step,
            });
        }
        let v1_emb: Vec<LabeledEmbedding> = caches1
            .iter()
            .zip(&labels)
            .map(|(c, &y)| LabeledEmbedding::new(c.g_embedding(), y))
            .collect();

        // Second view: key network for the momentum family (frozen members),
        // query network for gpaco (live members).
        let mut caches2: Vec<EncodeCache> = Vec::new();
        let mut v2_emb: Vec<LabeledEmbedding> = Vec::new();
        if needs_contrast && two_views {
            let net = if momentum_encoder {
                self.key.as_ref().expect("momentum key network")
            } else {
                &self.query
            };
            caches2 = v2_x.iter().map(|x| net.encode(x)).collect::<Result<_>>()?;
            if caches2.iter().any(|c| !c.is_finite()) {
                return Err(TrainerError::NumericalFailure {
                    step: self.global_step,
                });
            }
            v2_emb = caches2
                .iter()
                .zip(&labels)
                .map(|(c, &y)| LabeledEmbedding::new(c.g_embedding(), y))
                .collect();
        }
        let v2_members_live = needs_contrast && two_views && !momentum_encoder;

        let d_g = self.query.transform.output_dim();
        let d_f = self.encoder_spec.embed_dim;
        let n = self.centers.n_classes();
        let mut d_g1 = vec![vec![0.0; d_g]; b];
        let mut d_f1 = vec![vec![0.0; d_f]; b];
        let mut d_g2 = vec![vec![0.0; d_g]; b];
        let mut center_grads = Mat::zeros(n, d_f);
        let mut batch_loss = 0.0;
        let q_len = self.queue.len();

        for i in 0..b {
            let y = labels[i];
            if variant == LossVariant::CrossEntropy {
                let r = cross_entropy(&caches1[i].f_embedding(), &self.centers, y, center_tau)
                    .map_err(TrainerError::Core)?;
                batch_loss += inv_b * r.value;
                axpy(&mut d_f1[i], inv_b, &r.grad_f);
                center_grads.scaled_add(inv_b, &r.grad_centers);
                continue;
            }

            let members = contrast_member_refs(i, &v1_emb, &v2_emb, &self.queue);
            let positives: Vec<usize> = if variant == LossVariant::InfoNce {
                vec![q_len + (b - 1) + i]
            } else {
                members
                    .iter()
                    .enumerate()
                    .filter(|(_, m)| m.label == y)
                    .map(|(j, _)| j)
                    .collect()
            };

            let g_i = caches1[i].g_embedding();
            // (member-gradient slice, weight applied when routing)
            let (member_grads, member_weight) = match variant {
                LossVariant::Supcon | LossVariant::InfoNce => {
                    let out = supcon_loss_indexed(&g_i, &members, &positives, tau)
                        .map_err(TrainerError::Core)?;
                    batch_loss += inv_b * out.result.value;
                    axpy(&mut d_g1[i], inv_b, &out.result.grad_g);
                    (out.member_grads, 1.0)
                }
                LossVariant::MultiTask => {
                    let weight = self.config.loss.multi_task_weight;
                    let ce = cross_entropy(&caches1[i].f_embedding(), &self.centers, y, center_tau)
                        .map_err(TrainerError::Core)?;
                    let sc = supcon_loss_indexed(&g_i, &members, &positives, tau)
                        .map_err(TrainerError::Core)?;
                    batch_loss += inv_b * (ce.value + weight * sc.result.value);
                    axpy(&mut d_f1[i], inv_b, &ce.grad_f);
                    axpy(&mut d_g1[i], inv_b * weight, &sc.result.grad_g);
                    center_grads.scaled_add(inv_b, &ce.grad_centers);
                    (sc.member_grads, weight)
                }
                LossVariant::Paco | LossVariant::Gpaco | LossVariant::PacoRebalanced => {
                    let out = paco_loss_indexed(&PacoInputs {
                        g: &g_i,
                        f: &caches1[i].f_embedding(),
                        members: &members,
                        positive_idx: &positives,
                        centers: &self.centers,
                        y,
                        alpha,
                        tau,
                        center_tau,
                        center_logit_offsets: offsets.as_deref(),
                    })
                    .map_err(TrainerError::Core)?;
                    batch_loss += inv_b * out.result.value;
                    axpy(&mut d_g1[i], inv_b, &out.result.grad_g);
                    axpy(&mut d_f1[i], inv_b, &out.result.grad_f);
                    center_grads.scaled_add(inv_b, &out.result.grad_centers);
                    (out.member_grads, 1.0)
                }
                LossVariant::CrossEntropy => unreachable!("handled above"),
            };

            // Route member gradients back to live batch embeddings; queue
            // members and key-network outputs stay frozen.
            for (j, mg) in member_grads.iter().enumerate() {
                if j < q_len {
                    continue;
                }
                let j2 = j - q_len;
                if j2 < b - 1 {
                    let sample = if j2 < i { j2 } else { j2 + 1 };
                    axpy(&mut d_g1[sample], inv_b * member_weight, mg);
                } else if v2_members_live {
                    let sample = j2 - (b - 1);
                    axpy(&mut d_g2[sample], inv_b * member_weight, mg);
                }
            }
        }

        let mut grads = EncoderGrads::zeros_like(&self.query);
        let zero_f = vec![0.0; d_f];
        for i in 0..b {
            self.query
                .encode_backward(&caches1[i], &d_f1[i], &d_g1[i], &mut grads);
        }
        if v2_members_live {
            for i in 0..b {
                self.query
                    .encode_backward(&caches2[i], &zero_f, &d_g2[i], &mut grads);
            }
        }

        // Detached embeddings destined for the queue: second-view outputs
        // under two-view training, otherwise first-view outputs (key network
        // when a momentum encoder exists).
        let queue_entries: Vec<LabeledEmbedding> = if !uses_queue(variant) {
            Vec::new()
        } else if two_views {
            v2_emb
        } else if momentum_encoder {
            let key = self.key.as_ref().expect("momentum key network");
            v1_x.iter()
                .zip(&labels)
                .map(|(x, &y)| {
                    let cache = key.encode(x)?;
                    if !cache.is_finite() {
                        return Err(TrainerError::NumericalFailure {
                            step: self.global_step,
                        });
                    }
                    Ok(LabeledEmbedding::new(cache.g_embedding(), y))
                })
                .collect::<Result<_>>()?
        } else {
            v1_emb
        };

        Ok(BatchGradients {
            loss: batch_loss,
            encoder: grads,
            centers: center_grads,
            queue_entries,
        })
    }

    /// One pass over the data in shuffled full batches (a trailing partial
    /// batch is skipped to keep queue pushes batch-aligned). Returns the mean
    /// step loss.
    pub fn train_epoch(&mut self, data: &Dataset, lr: f64) -> Result<f64> {
        let mut indices: Vec<usize> = (0..data.len()).collect();
        indices.shuffle(&mut self.rng);
        let b = self.config.batch_size;
        let mut total = 0.0;
        let mut steps = 0;
        for chunk in indices.chunks_exact(b) {
            total += self.train_step(chunk, data, lr)?;
            steps += 1;
        }
        if steps == 0 {
            return Err(TrainerError::InvalidConfig(format!(
                "dataset of {} samples cannot fill one batch of {b}",
                data.len()
            )));
        }
        Ok(total / steps as f64)
    }
}

/// Train from scratch, evaluating on the balanced test split after every
/// epoch.
pub fn run_train(run: &RunConfig, data: &SyntheticData) -> Result<(TrainState, Vec<EpochRecord>)> {
    let mut state = TrainState::new(run, data)?;
    let mut records = Vec::with_capacity(run.train.epochs);
    for epoch in 0..run.train.epochs {
        let lr = cosine_lr(run.train.lr0, epoch, run.train.epochs);
        let loss = state.train_epoch(&data.train, lr)?;
        let metrics = evaluate(&state.query, &state.centers, &data.test, &data.counts)?;
        records.push(EpochRecord {
            epoch,
            loss,
            metrics,
        });
    }
    Ok((state, records))
}
