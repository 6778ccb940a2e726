//! Construction of the contrast sets A(i) and P(i).
//!
//! A(i) is the union of the queue and both batch views minus the anchor's own
//! first-view entry; P(i) is its same-label subset. The member order is fixed
//! (queue oldest-first, then view 1 skipping the anchor, then view 2) so that
//! losses and gradients are reproducible bit-for-bit given a seed. Callers
//! that need to know where a member came from can rely on that layout:
//! indices `0..queue.len()` are queue slots, the next `B - 1` are view-1
//! entries (anchor skipped), the final `B` are view-2 entries.

use crate::embedding::{ContrastBatch, LabeledEmbedding};
use crate::error::{CoreError, Result};
use crate::queue::FeatureQueue;

/// Owned (A(i), P(i)) for anchor `i`. P(i) may be empty.
pub fn build_contrast_sets(
    i: usize,
    batch: &ContrastBatch,
    queue: &FeatureQueue,
) -> Result<(Vec<LabeledEmbedding>, Vec<LabeledEmbedding>)> {
    if i >= batch.len() {
        return Err(CoreError::InvalidArgument(format!(
            "anchor index {i} out of range for batch of {}",
            batch.len()
        )));
    }
    let y = batch.view1()[i].label;
    let mut a = Vec::with_capacity(queue.len() + 2 * batch.len() - 1);
    a.extend(queue.entries().cloned());
    for (j, e) in batch.view1().iter().enumerate() {
        if j != i {
            a.push(e.clone());
        }
    }
    a.extend(batch.view2().iter().cloned());
    let p: Vec<LabeledEmbedding> = a.iter().filter(|e| e.label == y).cloned().collect();
    Ok((a, p))
}

/// Borrowed member views in the same fixed order, for hot loops that track
/// member provenance positionally.
pub fn contrast_member_refs<'a>(
    i: usize,
    view1: &'a [LabeledEmbedding],
    view2: &'a [LabeledEmbedding],
    queue: &'a FeatureQueue,
) -> Vec<&'a LabeledEmbedding> {
    let mut a: Vec<&LabeledEmbedding> = Vec::with_capacity(queue.len() + view1.len() + view2.len());
    a.extend(queue.entries());
    for (j, e) in view1.iter().enumerate() {
        if j != i {
            a.push(e);
        }
    }
    a.extend(view2.iter());
    a
}
