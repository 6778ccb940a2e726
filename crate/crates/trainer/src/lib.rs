//! Deterministic desk-scale training harness for the parametric contrastive
//! loss family: synthetic long-tailed Gaussian data, a small encoder with
//! hand-written reverse-mode gradients, the full two-view/queue training
//! loop, balanced evaluation over frequency tertiles, gradient-norm probes,
//! and the two-stage linear protocol.

pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod mlp;
pub mod pixels;
pub mod probe;
pub mod rng;
pub mod train;

pub use data::{
    augment_view, class_counts, make_longtailed_gaussians, Dataset, DatasetSpec, SyntheticData,
};
pub use encoder::{EncodeCache, EncoderGrads, EncoderNet, EncoderSpec};
pub use error::{Result, TrainerError};
pub use eval::{evaluate, evaluate_features, frequency_tertiles, predict, Metrics};
pub use mlp::{Activation, Linear, Mlp, MlpCache, MlpGrads};
pub use pixels::{sample_pixel_features, FeatureMap};
pub use probe::{classifier_grad_norm_probe, decile_ratio, linear_probe, ClassGradNorm, ProbeConfig};
pub use train::{
    cosine_lr, run_train, AugmentConfig, BatchGradients, EpochRecord, RunConfig, SavedState,
    TrainConfig, TrainState,
};
