//! The contrastive loss family: InfoNCE, cross-entropy, supervised
//! contrastive, parametric contrastive (with and without the balanced-softmax
//! center rebalance), the fixed-weight multi-task combination, and the
//! decomposition of the parametric loss into its multi-task-plus-extra form.
//!
//! Every trainable loss returns the exact gradient with respect to each of
//! its learnable inputs. Temperature always divides inner-product logits, and
//! every softmax goes through max-subtracted log-sum-exp.

mod balance;
mod cross_entropy;
mod decompose;
mod info_nce;
mod paco;
mod supcon;

pub use balance::{l_extra, supcon_at_fixed_psup};
pub use cross_entropy::cross_entropy;
pub use decompose::{decompose_paco, Decomposition};
pub use info_nce::info_nce;
pub use paco::{
    multi_task_loss, paco_loss, paco_loss_indexed, paco_loss_with_center_offsets,
    paco_rebalanced_loss, PacoInputs,
};
pub use supcon::{supcon_loss, supcon_loss_indexed};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::Mat;

/// Which loss drives training.
///
/// `Gpaco` shares the parametric loss computation with `Paco`; the two differ
/// only in how the trainer wires the second view (no momentum encoder for
/// `Gpaco`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    InfoNce,
    CrossEntropy,
    Supcon,
    Paco,
    Gpaco,
    PacoRebalanced,
    MultiTask,
}

impl LossVariant {
    pub fn name(&self) -> &'static str {
        match self {
            LossVariant::InfoNce => "info_nce",
            LossVariant::CrossEntropy => "cross_entropy",
            LossVariant::Supcon => "supcon",
            LossVariant::Paco => "paco",
            LossVariant::Gpaco => "gpaco",
            LossVariant::PacoRebalanced => "paco_rebalanced",
            LossVariant::MultiTask => "multi_task",
        }
    }
}

fn default_alpha() -> f64 {
    0.01
}

fn default_tau() -> f64 {
    0.07
}

fn default_multi_task_weight() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Loss hyperparameters shared by the whole family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub variant: LossVariant,
    /// Weight on sample-sample positive terms, in (0, 1).
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Softmax temperature, > 0.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Add log class priors to the center logits (balanced-softmax rebalance).
    #[serde(default)]
    pub center_rebalance: bool,
    /// Weight on the contrastive term in the multi-task combination.
    #[serde(default = "default_multi_task_weight")]
    pub multi_task_weight: f64,
    /// L2-normalize sample-side embeddings before contrast.
    #[serde(default = "default_true")]
    pub normalize_samples: bool,
    /// Divide center logits by tau too (on by default; the alternative keeps
    /// center logits untempered).
    #[serde(default = "default_true")]
    pub tau_on_centers: bool,
}

impl LossConfig {
    pub fn new(variant: LossVariant) -> Self {
        LossConfig {
            variant,
            alpha: default_alpha(),
            tau: default_tau(),
            center_rebalance: false,
            multi_task_weight: default_multi_task_weight(),
            normalize_samples: true,
            tau_on_centers: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 || self.alpha >= 1.0 || self.alpha.is_nan() {
            return Err(CoreError::InvalidConfig(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "tau = {} must be positive",
                self.tau
            )));
        }
        if self.multi_task_weight < 0.0 || !self.multi_task_weight.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "multi_task_weight = {} must be nonnegative",
                self.multi_task_weight
            )));
        }
        Ok(())
    }

    /// Temperature divisor applied to center logits.
    pub fn center_tau(&self) -> f64 {
        if self.tau_on_centers {
            self.tau
        } else {
            1.0
        }
    }
}

/// Scalar loss plus exact gradients with respect to each learnable input.
///
/// `grad_g` is d value / d G(x_i), `grad_f` is d value / d F(x_i), and
/// `grad_centers` is d value / d C. Inputs that do not participate in a
/// variant get zero gradients; variants with no center argument report an
/// empty (0 x 0) `grad_centers`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad_g: Vec<f64>,
    pub grad_f: Vec<f64>,
    pub grad_centers: Mat,
}

impl LossResult {
    pub fn zeros(d: usize, n_centers: usize, d_centers: usize) -> Self {
        LossResult {
            value: 0.0,
            grad_g: vec![0.0; d],
            grad_f: vec![0.0; d],
            grad_centers: Mat::zeros(n_centers, d_centers),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_g.iter().all(|v| v.is_finite())
            && self.grad_f.iter().all(|v| v.is_finite())
            && self.grad_centers.is_finite()
    }
}

/// A loss result together with gradients flowing into each contrast member,
/// aligned with the member slice the loss was evaluated on. Queue-sourced
/// members are frozen by the caller simply by dropping their entries.
#[derive(Debug, Clone)]
pub struct LossWithMembers {
    pub result: LossResult,
    pub member_grads: Vec<Vec<f64>>,
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "temperature {tau} must be positive"
        )));
    }
    Ok(())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha <= 0.0 || alpha >= 1.0 || alpha.is_nan() {
        return Err(CoreError::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    Ok(())
}
