//! FIFO feature queue standing in for the MoCo momentum queue.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::embedding::LabeledEmbedding;
use crate::error::{CoreError, Result};

/// Ring buffer of labeled embeddings with strict first-in-first-out eviction.
///
/// Mutation is single-writer; readers take a snapshot via [`FeatureQueue::entries`]
/// or [`FeatureQueue::snapshot`] and never observe a partial push.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureQueue {
    capacity: usize,
    entries: VecDeque<LabeledEmbedding>,
}

impl FeatureQueue {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::InvalidConfig(
                "queue capacity must be positive".into(),
            ));
        }
        Ok(FeatureQueue {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Oldest-first iteration.
    pub fn entries(&self) -> impl Iterator<Item = &LabeledEmbedding> {
        self.entries.iter()
    }

    /// Owned oldest-first copy of the current contents.
    pub fn snapshot(&self) -> Vec<LabeledEmbedding> {
        self.entries.iter().cloned().collect()
    }

    /// Append `batch`, evicting the oldest entries once over capacity.
    ///
    /// A single push larger than the whole queue is rejected, mirroring the
    /// dequeue-and-enqueue-whole-batch discipline.
    pub fn push(&mut self, batch: &[LabeledEmbedding]) -> Result<()> {
        if batch.len() > self.capacity {
            return Err(CoreError::QueueOverflow {
                pushed: batch.len(),
                capacity: self.capacity,
            });
        }
        if let (Some(first), Some(existing)) = (batch.first(), self.entries.front()) {
            if first.embedding.dim() != existing.embedding.dim() {
                return Err(CoreError::DimensionMismatch {
                    expected: existing.embedding.dim(),
                    got: first.embedding.dim(),
                });
            }
        }
        for e in batch {
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(e.clone());
        }
        Ok(())
    }
}
