//! Core machinery for the generalized parametric contrastive loss family:
//! domain types (embeddings, feature queue, class priors, learnable centers),
//! contrast-set construction, the momentum update, every loss in the family
//! with exact gradients, and simplex oracles that verify the converged-optimum
//! statements numerically.

pub mod centers;
pub mod contrast;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod momentum;
pub mod priors;
pub mod queue;
pub mod theory;

pub use centers::ClassCenters;
pub use contrast::{build_contrast_sets, contrast_member_refs};
pub use embedding::{l2_normalize, ContrastBatch, Embedding, LabeledEmbedding};
pub use error::{CoreError, Result};
pub use linalg::Mat;
pub use momentum::{momentum_update, EncoderParams};
pub use priors::{class_priors_from_counts, expected_positives, ClassPriors};
pub use queue::FeatureQueue;
