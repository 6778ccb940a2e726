//! Pixel-level auxiliary path: uniform sampling of labeled pixel features
//! from a dense feature map, each passed through the 3-layer pixel transform.

use gpaco_core::{l2_normalize, Embedding, LabeledEmbedding};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TrainerError};
use crate::mlp::Mlp;

/// H x W x C feature tensor with one label per pixel, stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
    pub labels: Vec<usize>,
}

impl FeatureMap {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if data.len() != h * w * c || labels.len() != h * w {
            return Err(TrainerError::Shape(format!(
                "feature map {h}x{w}x{c} needs {} values and {} labels, got {} and {}",
                h * w * c,
                h * w,
                data.len(),
                labels.len()
            )));
        }
        Ok(FeatureMap { h, w, c, data, labels })
    }

    pub fn pixel(&self, pos: usize) -> &[f64] {
        &self.data[pos * self.c..(pos + 1) * self.c]
    }
}

/// Draw min(k, H*W) distinct pixel positions uniformly without replacement
/// and return their transformed channel vectors with labels. Deterministic
/// given the generator state.
pub fn sample_pixel_features(
    map: &FeatureMap,
    k: usize,
    transform: &Mlp,
    normalize: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledEmbedding>> {
    let total = map.h * map.w;
    if total == 0 {
        return Err(TrainerError::Shape("feature map has no pixels".into()));
    }
    let take = k.min(total);

    // Partial Fisher-Yates: the first `take` slots end up a uniform sample
    // without replacement.
    let mut positions: Vec<usize> = (0..total).collect();
    for i in 0..take {
        let j = rng.random_range(i..total);
        positions.swap(i, j);
    }

    positions[..take]
        .iter()
        .map(|&pos| {
            let cache = transform.forward(map.pixel(pos))?;
            let emb = if normalize {
                l2_normalize(cache.output()).map_err(TrainerError::Core)?
            } else {
                Embedding::new(cache.output().to_vec()).map_err(TrainerError::Core)?
            };
            Ok(LabeledEmbedding::new(emb, map.labels[pos]))
        })
        .collect()
}
