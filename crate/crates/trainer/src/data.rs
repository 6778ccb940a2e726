//! Synthetic long-tailed Gaussian-mixture datasets and the desk-scale
//! augmentation used to produce two views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainerError};
use crate::rng::{gauss, gauss_vec};

fn default_separation() -> f64 {
    3.0
}

fn default_noise_sigma() -> f64 {
    1.0
}

fn default_test_per_class() -> usize {
    50
}

/// Shape of a synthetic dataset. `beta` is the imbalance factor
/// N_max / N_min; per-class counts interpolate geometrically between the
/// head and the tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_classes: usize,
    pub dim: usize,
    pub n_max: usize,
    pub beta: f64,
    pub seed: u64,
    #[serde(default = "default_separation")]
    pub class_separation: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    /// Size of the balanced test split, per class.
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(TrainerError::InvalidConfig(
                "n_classes must be at least 2".into(),
            ));
        }
        if self.dim == 0 {
            return Err(TrainerError::InvalidConfig("dim must be positive".into()));
        }
        if self.beta < 1.0 || !self.beta.is_finite() {
            return Err(TrainerError::InvalidConfig(format!(
                "beta = {} must be >= 1",
                self.beta
            )));
        }
        if (self.n_max as f64) < self.beta {
            return Err(TrainerError::InvalidConfig(format!(
                "n_max = {} must be >= beta = {} so the tail class keeps at least one sample",
                self.n_max, self.beta
            )));
        }
        if self.class_separation <= 0.0 || self.noise_sigma < 0.0 {
            return Err(TrainerError::InvalidConfig(
                "class_separation must be positive and noise_sigma nonnegative".into(),
            ));
        }
        if self.test_per_class == 0 {
            return Err(TrainerError::InvalidConfig(
                "test_per_class must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A labeled point cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Long-tailed train split plus its balanced test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    pub spec: DatasetSpec,
    pub counts: Vec<usize>,
    pub train: Dataset,
    pub test: Dataset,
    pub means: Vec<Vec<f64>>,
}

/// n_k = round(N_max * beta^(-k / (n - 1))), the geometric profile between
/// N_max and N_max / beta.
pub fn class_counts(spec: &DatasetSpec) -> Vec<usize> {
    let n = spec.n_classes;
    (0..n)
        .map(|k| {
            let expo = -(k as f64) / (n as f64 - 1.0);
            (spec.n_max as f64 * spec.beta.powf(expo)).round() as usize
        })
        .collect()
}

fn draw_means(spec: &DatasetSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut scale = spec.class_separation;
    loop {
        let means: Vec<Vec<f64>> = (0..spec.n_classes)
            .map(|_| gauss_vec(rng, spec.dim).into_iter().map(|v| v * scale).collect())
            .collect();
        let mut min_dist = f64::INFINITY;
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                let d2: f64 = means[i]
                    .iter()
                    .zip(&means[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                min_dist = min_dist.min(d2.sqrt());
            }
        }
        if min_dist >= spec.class_separation {
            return means;
        }
        scale *= 1.25;
    }
}

/// Deterministically generate the long-tailed train split and a balanced test
/// split from the spec's seed. Class means are spaced at least
/// `class_separation` apart; samples are mean plus isotropic Gaussian noise.
pub fn make_longtailed_gaussians(spec: &DatasetSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let means = draw_means(spec, &mut rng);
    let counts = class_counts(spec);

    let mut train = Dataset {
        x: Vec::new(),
        y: Vec::new(),
    };
    for (k, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let x: Vec<f64> = means[k]
                .iter()
                .map(|&m| m + spec.noise_sigma * gauss(&mut rng))
                .collect();
            train.x.push(x);
            train.y.push(k);
        }
    }

    let mut test = Dataset {
        x: Vec::new(),
        y: Vec::new(),
    };
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..spec.test_per_class {
            let x: Vec<f64> = mean
                .iter()
                .map(|&m| m + spec.noise_sigma * gauss(&mut rng))
                .collect();
            test.x.push(x);
            test.y.push(k);
        }
    }

    Ok(SyntheticData {
        spec: spec.clone(),
        counts,
        train,
        test,
        means,
    })
}

/// s * x + eps with s uniform on [1 - scale_jitter, 1 + scale_jitter] and eps
/// isotropic Gaussian of scale `noise`. The scale is drawn first, then one
/// noise term per coordinate.
pub fn augment_view(x: &[f64], noise: f64, scale_jitter: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let s = 1.0 - scale_jitter + 2.0 * scale_jitter * rng.random::<f64>();
    x.iter().map(|&v| s * v + noise * gauss(rng)).collect()
}
